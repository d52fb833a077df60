//! Flat `key = value` configuration with `#` comments.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::str::FromStr;

use crate::dressing::Recipe;
use crate::error::{LabError, Result};
use crate::linalg::C64;
use crate::model::{Boundary, Component, DiracModel, GaugePotential, MomentumGrid};
use crate::symbolic::{ClassicalSymbol, Remainder};

use super::report::format_float;

/// Remainder of the configured symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RemainderKind {
    None,
    Gaussian,
    Rational,
}

impl FromStr for RemainderKind {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(RemainderKind::None),
            "gaussian" => Ok(RemainderKind::Gaussian),
            "rational" => Ok(RemainderKind::Rational),
            other => Err(LabError::config(format!("unknown remainder '{other}' (none, gaussian, rational)"))),
        }
    }
}

impl RemainderKind {
    fn name(self) -> &'static str {
        match self {
            RemainderKind::None => "none",
            RemainderKind::Gaussian => "gaussian",
            RemainderKind::Rational => "rational",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub nmax: usize,
    pub length: f64,
    pub boundary: Boundary,
    pub mass: f64,
    pub coupling: f64,
    pub duration: f64,
    /// Explicit Fourier modes; `None` selects the default field.
    pub modes: Option<(BTreeMap<i64, C64>, BTreeMap<i64, C64>)>,
    pub tol: f64,
    pub steps: usize,
    pub max_halvings: usize,
    pub transport_rel_tol: f64,
    pub recipe: Recipe,
    pub seed: u64,
    pub eq4_random: usize,
    pub eq4_random_nmax: usize,
    pub curvature_pairs: usize,
    pub curvature_dim: usize,
    pub holonomy_pairs: usize,
    pub holonomy_dim: usize,
    pub holonomy_scale: f64,
    pub holonomy_h: Vec<f64>,
    pub dyson_lambdas: Vec<f64>,
    pub dyson_kappa_lambdas: Vec<f64>,
    pub sym_order: i32,
    pub sym_cplus: BTreeMap<usize, C64>,
    pub sym_cminus: BTreeMap<usize, C64>,
    pub sym_remainder: RemainderKind,
    pub sym_amp: f64,
    pub sym_width: f64,
    pub sym_power: f64,
    pub sym_mu: f64,
    pub anomaly_mu: f64,
    pub anomaly_cutoffs: Vec<usize>,
    pub split_resplits: usize,
    pub split_nmax: usize,
    pub sweep_nmax: Vec<usize>,
}

impl Default for Config {
    fn default() -> Self {
        let one: BTreeMap<usize, C64> = [(0, C64::new(1.0, 0.0))].into_iter().collect();
        Self {
            nmax: 24,
            length: 2.0 * PI,
            boundary: Boundary::Periodic,
            mass: 1.0,
            coupling: 0.1,
            duration: 1.0,
            modes: None,
            tol: 1e-10,
            steps: 8,
            max_halvings: 20,
            transport_rel_tol: 1e-8,
            recipe: Recipe::ModeMixed,
            seed: 0,
            eq4_random: 5,
            eq4_random_nmax: 12,
            curvature_pairs: 100,
            curvature_dim: 64,
            holonomy_pairs: 10,
            holonomy_dim: 8,
            holonomy_scale: 0.5,
            holonomy_h: vec![0.04, 0.02, 0.01],
            dyson_lambdas: vec![0.02, 0.04, 0.06, 0.08, 0.1],
            dyson_kappa_lambdas: vec![0.001, 0.002, 0.003, 0.004],
            sym_order: -1,
            sym_cplus: one.clone(),
            sym_cminus: one,
            sym_remainder: RemainderKind::None,
            sym_amp: 1.0,
            sym_width: 1.0,
            sym_power: 3.0,
            sym_mu: 0.0,
            anomaly_mu: 1.0,
            anomaly_cutoffs: vec![64, 128, 256, 512],
            split_resplits: 50,
            split_nmax: 8,
            sweep_nmax: vec![8, 16, 24, 32],
        }
    }
}

fn parse_num<T: FromStr>(value: &str) -> std::result::Result<T, String> {
    value.parse::<T>().map_err(|_| format!("cannot parse '{value}'"))
}

fn parse_list<T: FromStr>(value: &str) -> std::result::Result<Vec<T>, String> {
    let items = value.split(',').map(|v| parse_num(v.trim())).collect::<std::result::Result<Vec<T>, _>>()?;
    if items.is_empty() {
        return Err("empty list".into());
    }
    Ok(items)
}

fn parse_complex(value: &str) -> std::result::Result<C64, String> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [re] => Ok(C64::new(parse_num(re)?, 0.0)),
        [re, im] => Ok(C64::new(parse_num(re)?, parse_num(im)?)),
        _ => Err(format!("expected 're,im', got '{value}'")),
    }
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn join_floats(items: &[f64]) -> String {
    items.iter().map(|&x| format_float(x)).collect::<Vec<_>>().join(",")
}

fn echo_complex(z: C64) -> String {
    format!("{},{}", format_float(z.re), format_float(z.im))
}

impl Config {
    /// Parses a configuration file on top of the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut pending = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| LabError::Config {
                line: Some(n + 1),
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            pending.push((n + 1, key.trim().to_string(), value.trim().to_string()));
        }
        for (line, key, value) in pending {
            cfg.set(&key, &value).map_err(|message| LabError::Config { line: Some(line), message })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key; the error names the key.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let wrap = |r: std::result::Result<(), String>| r.map_err(|e| format!("{key}: {e}"));
        wrap(self.set_inner(key, value))
    }

    fn set_inner(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        match key {
            "grid.nmax" => self.nmax = parse_num(value)?,
            "grid.L" => self.length = parse_num(value)?,
            "grid.boundary" => self.boundary = value.parse().map_err(|e: LabError| e.to_string())?,
            "model.mass" => self.mass = parse_num(value)?,
            "pot.lambda" => self.coupling = parse_num(value)?,
            "pot.T" => self.duration = parse_num(value)?,
            "evolve.tol" => self.tol = parse_num(value)?,
            "evolve.steps" => self.steps = parse_num(value)?,
            "evolve.max_halvings" => self.max_halvings = parse_num(value)?,
            "transport.rel_tol" => self.transport_rel_tol = parse_num(value)?,
            "dressing.recipe" => self.recipe = value.parse().map_err(|e: LabError| e.to_string())?,
            "seed" => self.seed = parse_num(value)?,
            "eq4.random" => self.eq4_random = parse_num(value)?,
            "eq4.random_nmax" => self.eq4_random_nmax = parse_num(value)?,
            "curvature.pairs" => self.curvature_pairs = parse_num(value)?,
            "curvature.dim" => self.curvature_dim = parse_num(value)?,
            "holonomy.pairs" => self.holonomy_pairs = parse_num(value)?,
            "holonomy.dim" => self.holonomy_dim = parse_num(value)?,
            "holonomy.scale" => self.holonomy_scale = parse_num(value)?,
            "holonomy.h" => self.holonomy_h = parse_list(value)?,
            "dyson.lambdas" => self.dyson_lambdas = parse_list(value)?,
            "dyson.kappa_lambdas" => self.dyson_kappa_lambdas = parse_list(value)?,
            "sym.order" => self.sym_order = parse_num(value)?,
            "sym.remainder" => self.sym_remainder = value.parse().map_err(|e: LabError| e.to_string())?,
            "sym.remainder.amp" => self.sym_amp = parse_num(value)?,
            "sym.remainder.width" => self.sym_width = parse_num(value)?,
            "sym.remainder.power" => self.sym_power = parse_num(value)?,
            "sym.mu" => self.sym_mu = parse_num(value)?,
            "anomaly.mu" => self.anomaly_mu = parse_num(value)?,
            "anomaly.cutoffs" => self.anomaly_cutoffs = parse_list(value)?,
            "split.resplits" => self.split_resplits = parse_num(value)?,
            "split.nmax" => self.split_nmax = parse_num(value)?,
            "sweep.nmax" => self.sweep_nmax = parse_list(value)?,
            _ => return self.set_indexed(key, value),
        }
        Ok(())
    }

    fn set_indexed(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let unknown = || format!("unknown key '{key}'");
        let (prefix, index) = key.rsplit_once('.').ok_or_else(unknown)?;
        match prefix {
            "pot.A0" | "pot.A1" => {
                let k: i64 = index.parse().map_err(|_| unknown())?;
                let z = parse_complex(value)?;
                let modes = self.modes.get_or_insert_with(Default::default);
                let map = if prefix == "pot.A0" { &mut modes.0 } else { &mut modes.1 };
                map.insert(k, z);
            }
            "sym.cplus" | "sym.cminus" => {
                let j: usize = index.parse().map_err(|_| unknown())?;
                let z = parse_complex(value)?;
                let map = if prefix == "sym.cplus" { &mut self.sym_cplus } else { &mut self.sym_cminus };
                map.insert(j, z);
            }
            _ => return Err(unknown()),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(LabError::config(msg.to_string())) };
        check(self.nmax >= 1, "grid.nmax must be ≥ 1")?;
        check(self.length > 0.0 && self.length.is_finite(), "grid.L must be positive")?;
        check(self.mass >= 0.0 && self.mass.is_finite(), "model.mass must be ≥ 0")?;
        check(self.duration > 0.0 && self.duration.is_finite(), "pot.T must be positive")?;
        check(self.coupling.is_finite(), "pot.lambda must be finite")?;
        check(self.tol > 0.0, "evolve.tol must be positive")?;
        check(self.steps >= 2, "evolve.steps must be ≥ 2")?;
        check(self.transport_rel_tol > 0.0, "transport.rel_tol must be positive")?;
        check(self.curvature_dim >= 2 && self.curvature_dim <= 64, "curvature.dim must lie in 2..=64")?;
        check(self.holonomy_dim >= 2, "holonomy.dim must be ≥ 2")?;
        check(
            self.holonomy_h.len() >= 2 && self.holonomy_h.iter().all(|&h| h > 0.0),
            "holonomy.h needs ≥ 2 positive sides",
        )?;
        check(self.dyson_lambdas.len() >= 4, "dyson.lambdas needs ≥ 4 values")?;
        check(self.dyson_kappa_lambdas.len() >= 1, "dyson.kappa_lambdas needs a value")?;
        check(self.anomaly_cutoffs.len() == 4, "anomaly.cutoffs needs exactly 4 cutoffs")?;
        check(
            self.sym_cplus.keys().chain(self.sym_cminus.keys()).all(|&j| j < crate::symbolic::MAX_COMPONENTS),
            "symbol component index too large",
        )?;
        check(
            !self.sweep_nmax.is_empty() && self.sweep_nmax.iter().all(|&n| n >= 1),
            "sweep.nmax needs positive cutoffs",
        )?;
        let pot = self.potential();
        if pot.reality_defect() > 1e-14 {
            return Err(LabError::config(format!(
                "pot modes violate a_(-k) = conj(a_k) by {:.3e}",
                pot.reality_defect()
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<MomentumGrid> {
        MomentumGrid::new(self.length, self.nmax, self.boundary)
    }

    pub fn model(&self) -> Result<DiracModel> {
        DiracModel::new(self.grid()?, self.mass)
    }

    pub fn model_with_cutoff(&self, nmax: usize) -> Result<DiracModel> {
        DiracModel::new(MomentumGrid::new(self.length, nmax, self.boundary)?, self.mass)
    }

    /// Configured potential; explicit modes are completed by their conjugate
    /// partners unless both are given.
    pub fn potential(&self) -> GaugePotential {
        match &self.modes {
            None => GaugePotential::default_field(self.coupling, self.duration),
            Some((a0, a1)) => {
                let mut pot = GaugePotential::new(self.coupling, self.duration);
                for (comp, map) in [(Component::A0, a0), (Component::A1, a1)] {
                    for (&k, &z) in map {
                        if k >= 0 || !map.contains_key(&-k) {
                            pot.set_mode(comp, k, z);
                        }
                    }
                    // explicit negative modes override the completed partner
                    for (&k, &z) in map.iter().filter(|(k, _)| **k < 0 && map.contains_key(&-**k)) {
                        match comp {
                            Component::A0 => pot.a0.insert(k, z),
                            Component::A1 => pot.a1.insert(k, z),
                        };
                    }
                }
                pot
            }
        }
    }

    pub fn symbol(&self, grid: &MomentumGrid) -> Result<ClassicalSymbol> {
        let len = self.sym_cplus.keys().chain(self.sym_cminus.keys()).map(|j| j + 1).max().unwrap_or(0);
        let zero = C64::new(0.0, 0.0);
        let comps = (0..len)
            .map(|j| {
                (self.sym_cplus.get(&j).copied().unwrap_or(zero), self.sym_cminus.get(&j).copied().unwrap_or(zero))
            })
            .collect();
        let amp = C64::new(self.sym_amp, 0.0);
        let remainder = match self.sym_remainder {
            RemainderKind::None => Remainder::Zero,
            RemainderKind::Gaussian => Remainder::Gaussian { amp, width: self.sym_width },
            RemainderKind::Rational => Remainder::Rational { amp, scale: self.sym_width, power: self.sym_power },
        };
        ClassicalSymbol::new(self.sym_order, comps, remainder, grid.clone())
    }

    /// Every key with its resolved value, sorted by key.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("grid.nmax", self.nmax.to_string());
        put("grid.L", format_float(self.length));
        put("grid.boundary", self.boundary.to_string());
        put("model.mass", format_float(self.mass));
        put("pot.lambda", format_float(self.coupling));
        put("pot.T", format_float(self.duration));
        put("evolve.tol", format_float(self.tol));
        put("evolve.steps", self.steps.to_string());
        put("evolve.max_halvings", self.max_halvings.to_string());
        put("transport.rel_tol", format_float(self.transport_rel_tol));
        put("dressing.recipe", self.recipe.to_string());
        put("seed", self.seed.to_string());
        put("eq4.random", self.eq4_random.to_string());
        put("eq4.random_nmax", self.eq4_random_nmax.to_string());
        put("curvature.pairs", self.curvature_pairs.to_string());
        put("curvature.dim", self.curvature_dim.to_string());
        put("holonomy.pairs", self.holonomy_pairs.to_string());
        put("holonomy.dim", self.holonomy_dim.to_string());
        put("holonomy.scale", format_float(self.holonomy_scale));
        put("holonomy.h", join_floats(&self.holonomy_h));
        put("dyson.lambdas", join_floats(&self.dyson_lambdas));
        put("dyson.kappa_lambdas", join_floats(&self.dyson_kappa_lambdas));
        put("sym.order", self.sym_order.to_string());
        for (j, z) in &self.sym_cplus {
            put(&format!("sym.cplus.{j}"), echo_complex(*z));
        }
        for (j, z) in &self.sym_cminus {
            put(&format!("sym.cminus.{j}"), echo_complex(*z));
        }
        put("sym.remainder", self.sym_remainder.name().to_string());
        put("sym.remainder.amp", format_float(self.sym_amp));
        put("sym.remainder.width", format_float(self.sym_width));
        put("sym.remainder.power", format_float(self.sym_power));
        put("sym.mu", format_float(self.sym_mu));
        put("anomaly.mu", format_float(self.anomaly_mu));
        put("anomaly.cutoffs", join(&self.anomaly_cutoffs));
        put("split.resplits", self.split_resplits.to_string());
        put("split.nmax", self.split_nmax.to_string());
        put("sweep.nmax", join(&self.sweep_nmax));
        let pot = self.potential();
        for (name, map) in [("A0", &pot.a0), ("A1", &pot.a1)] {
            for (k, z) in map {
                put(&format!("pot.{name}.{k}"), echo_complex(*z));
            }
        }
        m
    }

    /// The echo as a config file that parses back to `self`.
    pub fn to_text(&self) -> String {
        self.echo().into_iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_echo() {
        let cfg = Config::default();
        let back = Config::parse(&cfg.to_text()).unwrap();
        assert_eq!(back.echo(), cfg.echo());
        assert_eq!(back.potential(), cfg.potential());
        assert!(cfg.echo().contains_key("pot.A0.-1"));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = Config::parse("# comment\ngrid.nmax = 8\nbogus.key = 1\n").unwrap_err();
        assert_eq!(err, LabError::Config { line: Some(3), message: "bogus.key: unknown key 'bogus.key'".into() });
        let err = Config::parse("grid.nmax 8").unwrap_err();
        assert!(matches!(err, LabError::Config { line: Some(1), .. }));
        let err = Config::parse("\n\ngrid.nmax = eight").unwrap_err();
        assert!(matches!(err, LabError::Config { line: Some(3), .. }));
        assert!(Config::parse("pot.A0.1 = 0.3,0\npot.A0.-1 = 0.1,0").is_err());
    }

    #[test]
    fn explicit_modes_replace_the_default_field() {
        let cfg = Config::parse("pot.A0.2 = 0.1,0.2  # one mode\npot.lambda = 0.5").unwrap();
        let pot = cfg.potential();
        assert_eq!(pot.a0.len(), 2);
        assert_eq!(pot.a0[&-2], C64::new(0.1, -0.2));
        assert!(pot.a1.is_empty());
        assert_eq!(pot.coupling, 0.5);
        let sym = Config::parse("sym.order = -2\nsym.cplus.1 = 0.5").unwrap().symbol(&cfg.grid().unwrap()).unwrap();
        assert_eq!(sym.components().len(), 2);
    }
}
