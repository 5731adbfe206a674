use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::analytic::{candidate_point_search, SinglePaInstance};
use crate::baselines::{
    analog_multicast_beamformer, digital_multicast_beamformer, hybrid_multicast_beamformer, ula_channel,
    UlaConfig,
};
use crate::elementwise::{optimize_single_waveguide, GridSpec, SweepOptions};
use crate::error::{Error, Result};
use crate::joint::{default_init, optimize_joint, JointOptions};
use crate::model::{PinchingLayout, SystemParams, UserSet};

use super::config::Scenario;

/// Inputs shared by every method within one trial.
#[derive(Debug, Clone)]
pub struct TrialContext<'a> {
    pub params: &'a SystemParams,
    pub users: &'a UserSet,
    pub grid: &'a GridSpec,
    /// Trial seed, for methods with randomized internals.
    pub seed: u64,
    pub max_iters: usize,
}

/// Achieved worst-user rate (bits/s/Hz) and the iterations spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodOutcome {
    pub rate: f64,
    pub iters: usize,
}

/// A multicast design evaluated by the Monte Carlo harness.
pub trait MulticastMethod: Send + Sync {
    fn name(&self) -> &'static str;
    fn supports(&self, scenario: Scenario) -> bool;
    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome>;
}

/// Single antenna placed by the exact candidate search.
pub struct PassSinglePa;

impl MulticastMethod for PassSinglePa {
    fn name(&self) -> &'static str {
        "pass-single-pa"
    }

    fn supports(&self, scenario: Scenario) -> bool {
        scenario == Scenario::SinglePaLinear
    }

    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let inst = SinglePaInstance::new(ctx.params, ctx.users)?;
        let (_, rate) = candidate_point_search(&inst)?;
        Ok(MethodOutcome { rate, iters: 1 })
    }
}

/// Single antenna fixed at the middle of the waveguide.
pub struct FixedCenter;

impl MulticastMethod for FixedCenter {
    fn name(&self) -> &'static str {
        "fixed-center"
    }

    fn supports(&self, scenario: Scenario) -> bool {
        scenario == Scenario::SinglePaLinear
    }

    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let inst = SinglePaInstance::new(ctx.params, ctx.users)?;
        Ok(MethodOutcome {
            rate: inst.multicast_rate(ctx.params.dx / 2.0),
            iters: 0,
        })
    }
}

/// Element-wise search over the antennas of one waveguide.
pub struct PassSingle;

impl MulticastMethod for PassSingle {
    fn name(&self) -> &'static str {
        "pass-single"
    }

    fn supports(&self, scenario: Scenario) -> bool {
        scenario == Scenario::SingleWaveguide
    }

    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let init = PinchingLayout::uniform(ctx.params);
        let res = optimize_single_waveguide(&init, ctx.users, ctx.params, ctx.grid, SweepOptions::default())?;
        Ok(MethodOutcome {
            rate: res.rate(),
            iters: res.sweeps,
        })
    }
}

/// Joint transmit and pinching design over several waveguides.
pub struct PassMulti;

impl MulticastMethod for PassMulti {
    fn name(&self) -> &'static str {
        "pass-multi"
    }

    fn supports(&self, scenario: Scenario) -> bool {
        scenario == Scenario::MultiWaveguide
    }

    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let (layout, w) = default_init(ctx.params, ctx.users);
        let opts = JointOptions {
            max_iters: ctx.max_iters,
            ..JointOptions::default()
        };
        let res = optimize_joint(&layout, &w, ctx.params, ctx.users, ctx.grid, opts)?;
        Ok(MethodOutcome {
            rate: res.iterate.rate,
            iters: res.iterate.iteration,
        })
    }
}

fn ula(ctx: &TrialContext<'_>, elements: usize) -> Result<(UlaConfig, Vec<Vec<Complex64>>)> {
    let cfg = UlaConfig::new(ctx.params, elements)?;
    let h = ula_channel(&cfg, ctx.users, ctx.params);
    Ok((cfg, h))
}

/// Fully digital array with one element per waveguide (or per antenna in
/// the single-waveguide case).
pub struct Conventional;

impl MulticastMethod for Conventional {
    fn name(&self) -> &'static str {
        "conventional"
    }

    fn supports(&self, scenario: Scenario) -> bool {
        scenario != Scenario::SinglePaLinear
    }

    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let p = ctx.params;
        let elements = if p.waveguides == 1 { p.pas_per_waveguide } else { p.waveguides };
        let (_, h) = ula(ctx, elements)?;
        let sol = digital_multicast_beamformer(&h, p)?;
        Ok(MethodOutcome { rate: sol.rate, iters: sol.iterations })
    }
}

/// N phase shifters on one RF chain.
pub struct Analog;

impl MulticastMethod for Analog {
    fn name(&self) -> &'static str {
        "analog"
    }

    fn supports(&self, scenario: Scenario) -> bool {
        scenario == Scenario::SingleWaveguide
    }

    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let (_, h) = ula(ctx, ctx.params.pas_per_waveguide)?;
        let sol = analog_multicast_beamformer(&h, ctx.params)?;
        Ok(MethodOutcome { rate: sol.rate, iters: sol.iterations })
    }
}

/// Fully digital array with M N elements.
pub struct Massive;

impl MulticastMethod for Massive {
    fn name(&self) -> &'static str {
        "massive"
    }

    fn supports(&self, scenario: Scenario) -> bool {
        scenario == Scenario::MultiWaveguide
    }

    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let p = ctx.params;
        let (_, h) = ula(ctx, p.waveguides * p.pas_per_waveguide)?;
        let sol = digital_multicast_beamformer(&h, p)?;
        Ok(MethodOutcome { rate: sol.rate, iters: sol.iterations })
    }
}

/// M RF chains, each driving N elements through phase shifters.
pub struct Hybrid;

impl MulticastMethod for Hybrid {
    fn name(&self) -> &'static str {
        "hybrid"
    }

    fn supports(&self, scenario: Scenario) -> bool {
        scenario == Scenario::MultiWaveguide
    }

    fn run(&self, ctx: &TrialContext<'_>) -> Result<MethodOutcome> {
        let p = ctx.params;
        let (cfg, h) = ula(ctx, p.waveguides * p.pas_per_waveguide)?;
        let centroid = UserSet::new(vec![ctx.users.centroid()])?;
        let hc = ula_channel(&cfg, &centroid, p).remove(0);
        let sol = hybrid_multicast_beamformer(&h, p, &hc, p.waveguides, p.pas_per_waveguide)?;
        Ok(MethodOutcome { rate: sol.rate, iters: sol.iterations })
    }
}

/// Methods keyed by name.
pub struct MethodRegistry {
    methods: BTreeMap<String, Box<dyn MulticastMethod>>,
}

impl MethodRegistry {
    pub fn empty() -> Self {
        Self { methods: BTreeMap::new() }
    }

    pub fn with_defaults() -> Self {
        let mut reg = Self::empty();
        reg.register(Box::new(PassSinglePa));
        reg.register(Box::new(FixedCenter));
        reg.register(Box::new(PassSingle));
        reg.register(Box::new(PassMulti));
        reg.register(Box::new(Conventional));
        reg.register(Box::new(Analog));
        reg.register(Box::new(Massive));
        reg.register(Box::new(Hybrid));
        reg
    }

    pub fn register(&mut self, method: Box<dyn MulticastMethod>) {
        self.methods.insert(method.name().to_string(), method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn MulticastMethod> {
        self.methods
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| Error::UnknownName { kind: "method", name: name.to_string() })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.methods.keys().map(String::as_str)
    }
}

impl Default for MethodRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_users, SystemConfig};

    #[test]
    fn registry_lists_every_method() {
        let reg = MethodRegistry::with_defaults();
        let names: Vec<&str> = reg.names().collect();
        assert_eq!(
            names,
            ["analog", "conventional", "fixed-center", "hybrid", "massive", "pass-multi", "pass-single", "pass-single-pa"]
        );
        assert!(matches!(reg.get("nope"), Err(Error::UnknownName { .. })));
    }

    #[test]
    fn single_waveguide_methods_run() {
        let p = SystemParams::derive(&SystemConfig {
            pas_per_waveguide: 3,
            users: 2,
            dx: 10.0,
            ..SystemConfig::default()
        })
        .unwrap();
        let users = sample_users(&p, 1);
        let grid = GridSpec::new(101, p.dx).unwrap();
        let ctx = TrialContext { params: &p, users: &users, grid: &grid, seed: 1, max_iters: 50 };
        let reg = MethodRegistry::with_defaults();
        for name in ["pass-single", "conventional", "analog"] {
            let out = reg.get(name).unwrap().run(&ctx).unwrap();
            assert!(out.rate.is_finite() && out.rate > 0.0, "{name}: {out:?}");
        }
    }
}
