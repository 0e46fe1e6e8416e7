use alloc::vec::Vec;

use nalgebra::DVector;

use crate::cost::CostFunction;
use crate::error::{Error, Result};
use crate::linalg;

/// A start point and the ordered costs `f_1 … f_T` of one run.
#[derive(Clone, Debug)]
pub struct SocoInstance {
    x0: DVector<f64>,
    costs: Vec<CostFunction>,
}

impl SocoInstance {
    pub fn new(x0: DVector<f64>, costs: Vec<CostFunction>) -> Result<Self> {
        if costs.is_empty() {
            return Err(Error::EmptyInstance);
        }
        let d = x0.len();
        if d == 0 {
            return Err(Error::InvalidParameter {
                name: "x0",
                reason: "dimension must be at least 1",
            });
        }
        for (t, f) in costs.iter().enumerate() {
            if f.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: f.dim(),
                }
                .at_round(t + 1));
            }
        }
        Ok(Self { x0, costs })
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn costs(&self) -> &[CostFunction] {
        &self.costs
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn horizon(&self) -> usize {
        self.costs.len()
    }

    /// `v_1 … v_T`.
    pub fn minimizers(&self) -> Vec<DVector<f64>> {
        self.costs.iter().map(|f| f.minimizer().clone()).collect()
    }

    /// `x_0, v_1 … v_T`: the minimizer sequence anchored at the start point,
    /// which is the sequence smoothness and drift are measured on.
    pub fn anchored_minimizers(&self) -> Vec<DVector<f64>> {
        core::iter::once(self.x0.clone())
            .chain(self.costs.iter().map(|f| f.minimizer().clone()))
            .collect()
    }

    /// Smallest strong-convexity modulus over the rounds.
    pub fn modulus(&self) -> f64 {
        self.costs
            .iter()
            .map(CostFunction::modulus)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn with_costs(&self, costs: Vec<CostFunction>) -> Result<Self> {
        Self::new(self.x0.clone(), costs)
    }

    /// Evaluates the objective `Σ f_t(x_t) + ½‖x_t − x_{t−1}‖²` along `points`.
    pub fn evaluate(&self, points: Vec<DVector<f64>>) -> Result<Trajectory> {
        Trajectory::evaluate(self, points)
    }
}

/// Points `x_1 … x_T` with their per-round hitting and movement costs.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub x0: DVector<f64>,
    pub points: Vec<DVector<f64>>,
    pub hitting: Vec<f64>,
    pub movement: Vec<f64>,
    pub total_hitting: f64,
    pub total_movement: f64,
    pub total_cost: f64,
}

impl Trajectory {
    pub fn evaluate(instance: &SocoInstance, points: Vec<DVector<f64>>) -> Result<Self> {
        if points.len() != instance.horizon() {
            return Err(Error::LengthMismatch {
                expected: instance.horizon(),
                found: points.len(),
            });
        }
        let mut hitting = Vec::with_capacity(points.len());
        let mut movement = Vec::with_capacity(points.len());
        let mut prev = instance.x0();
        for (t, (x, f)) in points.iter().zip(instance.costs()).enumerate() {
            linalg::check_dim(x, instance.dim()).map_err(|e| e.at_round(t + 1))?;
            hitting.push(f.eval(x));
            movement.push(linalg::half_sq_dist(x, prev));
            prev = x;
        }
        Ok(Self::from_parts(instance.x0().clone(), points, hitting, movement))
    }

    pub(crate) fn from_parts(
        x0: DVector<f64>,
        points: Vec<DVector<f64>>,
        hitting: Vec<f64>,
        movement: Vec<f64>,
    ) -> Self {
        let total_hitting: f64 = hitting.iter().sum();
        let total_movement: f64 = movement.iter().sum();
        let total_cost = hitting.iter().zip(&movement).map(|(h, m)| h + m).sum();
        Self {
            x0,
            points,
            hitting,
            movement,
            total_hitting,
            total_movement,
            total_cost,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `‖x_t − x_{t−1}‖` for each round.
    pub fn step_lengths(&self) -> Vec<f64> {
        let mut prev = &self.x0;
        self.points
            .iter()
            .map(|x| {
                let d = linalg::dist(x, prev);
                prev = x;
                d
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::make_quadratic;
    use alloc::vec;
    use nalgebra::DMatrix;

    #[test]
    fn totals_are_round_sums() {
        let f = make_quadratic(DMatrix::identity(1, 1), DVector::from_vec(vec![1.0]), 0.0).unwrap();
        let inst = SocoInstance::new(DVector::zeros(1), vec![f.clone(), f]).unwrap();
        let tr = inst
            .evaluate(vec![DVector::from_vec(vec![0.5]), DVector::from_vec(vec![1.0])])
            .unwrap();
        assert_eq!(tr.hitting, vec![0.125, 0.0]);
        assert_eq!(tr.movement, vec![0.125, 0.125]);
        assert_eq!(tr.total_cost, 0.375);
        assert_eq!(tr.step_lengths(), vec![0.5, 0.5]);
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        assert!(matches!(
            SocoInstance::new(DVector::zeros(2), vec![]),
            Err(Error::EmptyInstance)
        ));
        let f = make_quadratic(DMatrix::identity(1, 1), DVector::zeros(1), 0.0).unwrap();
        assert!(SocoInstance::new(DVector::zeros(2), vec![f.clone()]).is_err());
        let inst = SocoInstance::new(DVector::zeros(1), vec![f]).unwrap();
        assert!(matches!(inst.evaluate(vec![]), Err(Error::LengthMismatch { .. })));
    }
}
