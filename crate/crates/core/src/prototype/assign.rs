//! Sample-to-prototype assignment and distances.

use serde::{Deserialize, Serialize};

use super::gmm::{PrototypeComponent, PrototypeModel};
use crate::error::{PcxError, Result};
use crate::linalg::sq_dist;

/// A prototype addressed by class id and component index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrototypeRef {
    pub class_id: usize,
    pub component: usize,
}

/// How candidate prototypes are ranked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignRule {
    /// `argmax log(lambda_i p_i(v))`.
    WeightedLogLikelihood,
    /// `argmax log p_i(v)`, ignoring mixture weights.
    LogLikelihood,
    /// `argmin` Mahalanobis distance.
    Mahalanobis,
    /// `argmin` Euclidean distance to the means.
    Euclidean,
}

pub fn mahalanobis(component: &PrototypeComponent, v: &[f64]) -> Result<f64> {
    check(component, v)?;
    Ok(component.mahalanobis_sq(v).sqrt())
}

pub fn euclidean(component: &PrototypeComponent, v: &[f64]) -> Result<f64> {
    check(component, v)?;
    Ok(sq_dist(component.mean(), v).sqrt())
}

fn check(component: &PrototypeComponent, v: &[f64]) -> Result<()> {
    if component.dim() != v.len() {
        return Err(PcxError::Shape(format!(
            "vector has {} entries, prototype has {}",
            v.len(),
            component.dim()
        )));
    }
    Ok(())
}

/// Score under `rule`, oriented so that larger is better.
pub fn component_score(component: &PrototypeComponent, v: &[f64], rule: AssignRule) -> f64 {
    match rule {
        AssignRule::WeightedLogLikelihood => component.weighted_log_density(v),
        AssignRule::LogLikelihood => component.log_density(v),
        AssignRule::Mahalanobis => -component.mahalanobis_sq(v),
        AssignRule::Euclidean => -sq_dist(component.mean(), v),
    }
}

/// Most likely prototype over all classes. Models are visited in ascending
/// class id; the first maximum wins ties.
pub fn assign_prototype(models: &[PrototypeModel], v: &[f64], rule: AssignRule) -> Result<PrototypeRef> {
    let mut order: Vec<&PrototypeModel> = models.iter().collect();
    order.sort_by_key(|m| m.class_id);
    let mut best: Option<(PrototypeRef, f64)> = None;
    for model in order {
        model.check_dim(v)?;
        for (i, c) in model.components.iter().enumerate() {
            let s = component_score(c, v, rule);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((
                    PrototypeRef {
                        class_id: model.class_id,
                        component: i,
                    },
                    s,
                ));
            }
        }
    }
    best.map(|(r, _)| r)
        .ok_or_else(|| PcxError::InvalidArgument("no prototype models given".into()))
}

/// Best component within one class model.
pub fn nearest_component(model: &PrototypeModel, v: &[f64], rule: AssignRule) -> Result<usize> {
    assign_prototype(std::slice::from_ref(model), v, rule).map(|r| r.component)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(class_id: usize, comps: Vec<PrototypeComponent>) -> PrototypeModel {
        PrototypeModel::from_components(class_id, comps).unwrap()
    }

    #[test]
    fn distances() {
        let c = PrototypeComponent::new(1.0, vec![0.0, 0.0], vec![4.0, 0.0, 0.0, 1.0]).unwrap();
        assert!((mahalanobis(&c, &[2.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);
        let id = PrototypeComponent::isotropic(1.0, vec![1.0, -1.0], 1.0).unwrap();
        for v in [[0.3, 2.0], [1.0, -1.0], [-4.0, 0.5]] {
            assert_eq!(mahalanobis(&id, &v).unwrap(), euclidean(&id, &v).unwrap());
        }
        assert_eq!(mahalanobis(&id, &[1.0, -1.0]).unwrap(), 0.0);
        assert!(euclidean(&id, &[1.0]).is_err());
    }

    #[test]
    fn picks_matching_mean_and_breaks_ties_low() {
        let far = model(0, vec![PrototypeComponent::isotropic(1.0, vec![50.0], 1.0).unwrap()]);
        let near = model(
            1,
            vec![
                PrototypeComponent::isotropic(0.5, vec![-1.0], 1.0).unwrap(),
                PrototypeComponent::isotropic(0.5, vec![1.0], 1.0).unwrap(),
            ],
        );
        let models = vec![near.clone(), far];
        let r = assign_prototype(&models, &[1.0], AssignRule::WeightedLogLikelihood).unwrap();
        assert_eq!(r, PrototypeRef { class_id: 1, component: 1 });
        for rule in [
            AssignRule::WeightedLogLikelihood,
            AssignRule::LogLikelihood,
            AssignRule::Mahalanobis,
            AssignRule::Euclidean,
        ] {
            let r = assign_prototype(std::slice::from_ref(&near), &[0.0], rule).unwrap();
            assert_eq!(r.component, 0);
        }
        assert!(assign_prototype(&[], &[0.0], AssignRule::Euclidean).is_err());
    }

    #[test]
    fn weights_matter_only_for_weighted_rule() {
        let m = model(
            0,
            vec![
                PrototypeComponent::isotropic(0.9, vec![0.0], 1.0).unwrap(),
                PrototypeComponent::isotropic(0.1, vec![2.0], 1.0).unwrap(),
            ],
        );
        // x = 1.2 is closer to component 1 but component 0 has 9x the weight
        assert_eq!(nearest_component(&m, &[1.2], AssignRule::WeightedLogLikelihood).unwrap(), 0);
        assert_eq!(nearest_component(&m, &[1.2], AssignRule::LogLikelihood).unwrap(), 1);
    }
}
