use std::collections::BTreeSet;

use super::ReconstructionReport;
use crate::error::{Error, Result};
use crate::federated::AdversaryHook;
use crate::models::{ModelParams, OptimizerState};

/// Active reconstruction: during the attack rounds the server sends the
/// target its current estimate instead of the global model, treats
/// `estimate - response` as a gradient and steps the optimizer on it.
///
/// The estimate starts from the target's most recent response. With SGD at
/// learning rate 1 this echoes the client's own model back to it.
#[derive(Debug, Clone)]
pub struct ActiveReconstruction {
    target: usize,
    attack_rounds: BTreeSet<usize>,
    optimizer: OptimizerState,
    estimate: Option<ModelParams>,
    last_response: Option<ModelParams>,
    performed: usize,
}

impl ActiveReconstruction {
    pub fn new(target: usize, attack_rounds: impl IntoIterator<Item = usize>, optimizer: OptimizerState) -> Self {
        Self {
            target,
            attack_rounds: attack_rounds.into_iter().collect(),
            optimizer,
            estimate: None,
            last_response: None,
            performed: 0,
        }
    }

    /// Starts from a response observed before this hook was attached.
    pub fn with_last_response(mut self, response: ModelParams) -> Self {
        self.last_response = Some(response);
        self
    }

    pub fn target(&self) -> usize {
        self.target
    }

    /// Attack rounds in which the target actually received the estimate.
    pub fn performed(&self) -> usize {
        self.performed
    }

    /// Current estimate; before the first attack round, the latest response.
    pub fn estimate(&self) -> Option<&ModelParams> {
        self.estimate.as_ref().or(self.last_response.as_ref())
    }

    pub fn report(&self) -> Result<ReconstructionReport> {
        let estimate = self
            .estimate()
            .cloned()
            .ok_or_else(|| Error::Protocol(format!("client {} never responded", self.target)))?;
        Ok(ReconstructionReport {
            estimate,
            l2_error: None,
            n_c: self.performed,
            lambda_min: None,
            condition: None,
            rank_deficient: false,
        })
    }
}

impl AdversaryHook for ActiveReconstruction {
    fn intercept(&mut self, round: usize, client: usize, _broadcast: &ModelParams) -> Result<Option<ModelParams>> {
        if client != self.target || !self.attack_rounds.contains(&round) {
            return Ok(None);
        }
        if self.estimate.is_none() {
            let start = self.last_response.clone().ok_or_else(|| {
                Error::Protocol(format!("client {} never responded before the attack", self.target))
            })?;
            self.estimate = Some(start);
        }
        Ok(self.estimate.clone())
    }

    fn observe(&mut self, round: usize, client: usize, delivered: &ModelParams, response: &ModelParams) -> Result<()> {
        if client != self.target {
            return Ok(());
        }
        if self.attack_rounds.contains(&round) {
            if let Some(est) = self.estimate.as_mut() {
                let pseudo = delivered.difference(response)?;
                self.optimizer.step(est.values_mut(), &pseudo)?;
                self.performed += 1;
            }
        }
        self.last_response = Some(response.clone());
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Adam, AdamConfig};

    fn lin(v: &[f64]) -> ModelParams {
        ModelParams::linear(v.to_vec()).unwrap()
    }

    #[test]
    fn attack_before_any_response_is_a_protocol_error() {
        let mut a = ActiveReconstruction::new(0, [0], OptimizerState::Sgd { lr: 1.0 });
        assert!(matches!(a.intercept(0, 0, &lin(&[0.0])), Err(Error::Protocol(_))));
        assert!(a.report().is_err());
    }

    #[test]
    fn fixed_point_does_not_move() {
        let opt = OptimizerState::Adam(Adam::new(AdamConfig { lr: 0.5, ..AdamConfig::default() }, 2).unwrap());
        let mut a = ActiveReconstruction::new(1, [1, 2, 3], opt);
        let star = lin(&[1.0, -2.0]);
        a.observe(0, 1, &lin(&[0.0, 0.0]), &star).unwrap();
        for r in 1..4 {
            let sent = a.intercept(r, 1, &lin(&[9.0, 9.0])).unwrap().unwrap();
            assert_eq!(sent, star);
            a.observe(r, 1, &sent, &star).unwrap();
        }
        assert_eq!(a.report().unwrap().estimate, star);
        assert_eq!(a.performed(), 3);
        assert_eq!(a.intercept(1, 0, &star).unwrap(), None);
    }

    #[test]
    fn unit_sgd_echoes_the_response() {
        let mut a = ActiveReconstruction::new(0, [5], OptimizerState::Sgd { lr: 1.0 });
        a.observe(4, 0, &lin(&[0.0]), &lin(&[2.0])).unwrap();
        let sent = a.intercept(5, 0, &lin(&[7.0])).unwrap().unwrap();
        assert_eq!(sent, lin(&[2.0]));
        a.observe(5, 0, &sent, &lin(&[1.5])).unwrap();
        assert_eq!(a.report().unwrap().estimate, lin(&[1.5]));
    }
}
