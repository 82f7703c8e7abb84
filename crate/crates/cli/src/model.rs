//! Turn plan specs into core model objects.

use anyhow::{Context, Result};

use quenched_core::rds::{Branch, DrivingSystem, MapFamily, PiecewiseLinearMap, GOLDEN};
use quenched_core::spectral::Observable;

use crate::config::{DrivingSpec, ExperimentPlan, MapSpec, ObsSpec};

pub fn build_map(spec: &MapSpec) -> quenched_core::Result<PiecewiseLinearMap> {
    match spec {
        MapSpec::Doubling => Ok(PiecewiseLinearMap::doubling()),
        MapSpec::Tripling => Ok(PiecewiseLinearMap::tripling()),
        MapSpec::Affine(branches) => PiecewiseLinearMap::new(
            branches
                .iter()
                .map(|b| Branch { lo: b[0], hi: b[1], slope: b[2], intercept: b[3] })
                .collect(),
        ),
    }
}

pub fn build_family(plan: &ExperimentPlan) -> Result<MapFamily> {
    let maps = plan
        .maps
        .iter()
        .map(build_map)
        .collect::<quenched_core::Result<Vec<_>>>()
        .context("building map family")?;
    MapFamily::new(maps).context("map family invariants")
}

pub fn build_driving(plan: &ExperimentPlan) -> Result<DrivingSystem> {
    let n = plan.maps.len();
    Ok(match &plan.driving {
        DrivingSpec::Bernoulli(None) => {
            DrivingSystem::bernoulli(vec![1.0 / n as f64; n], plan.seed)
                .context("uniform Bernoulli driving")?
        }
        DrivingSpec::Bernoulli(Some(probs)) => {
            DrivingSystem::bernoulli(probs.clone(), plan.seed).context("Bernoulli driving")?
        }
        DrivingSpec::Rotation(None) => {
            let boundaries = (0..n).map(|k| k as f64 / n as f64).collect();
            DrivingSystem::rotation(GOLDEN, boundaries, 0.0).context("golden rotation driving")?
        }
        DrivingSpec::Rotation(Some((alpha, boundaries, start))) => {
            DrivingSystem::rotation(*alpha, boundaries.clone(), *start)
                .context("rotation driving")?
        }
    })
}

pub fn build_raw_observable(plan: &ExperimentPlan) -> Observable {
    match plan.observable {
        ObsSpec::Cosine { k } => Observable::cosine(k),
        ObsSpec::Indicator { threshold, offset } => Observable::indicator(threshold, offset),
    }
}
