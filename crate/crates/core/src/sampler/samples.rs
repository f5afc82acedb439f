//! Recorded post-burn-in states and their columnar CSV form.
//!
//! Header: `theta_1..theta_n, z_1..z_n, p0, nu_s, sigma2, chain, sweep`.
//! Floats use the shortest representation that round-trips exactly; `z`
//! is written as 0/1 and `sweep` counts from 1 including burn-in.

use std::fmt::Write as _;
use std::path::Path;

use super::ChainState;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    states: Vec<ChainState>,
    n_chains: usize,
    n_burn: usize,
}

impl PosteriorSamples {
    /// `states` holds equal-length chains back to back.
    pub fn new(states: Vec<ChainState>, n_chains: usize, n_burn: usize) -> Result<Self> {
        if states.is_empty() || n_chains == 0 || states.len() % n_chains != 0 {
            return Err(Error::Shape(format!("{} states cannot form {n_chains} equal chains", states.len())));
        }
        let n = states[0].theta.len();
        if states.iter().any(|s| s.theta.len() != n || s.z.len() != n) {
            return Err(Error::Shape("states have inconsistent feature counts".into()));
        }
        Ok(Self { states, n_chains, n_burn })
    }

    pub fn states(&self) -> &[ChainState] {
        &self.states
    }
    pub fn len(&self) -> usize {
        self.states.len()
    }
    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
    pub fn n_chains(&self) -> usize {
        self.n_chains
    }
    pub fn n_burn(&self) -> usize {
        self.n_burn
    }
    /// Recorded states per chain.
    pub fn n_g(&self) -> usize {
        self.states.len() / self.n_chains
    }
    pub fn n_features(&self) -> usize {
        self.states[0].theta.len()
    }

    pub fn chain(&self, k: usize) -> &[ChainState] {
        let n = self.n_g();
        &self.states[k * n..(k + 1) * n]
    }

    pub fn header(n_features: usize) -> String {
        let mut cols: Vec<String> = (1..=n_features).map(|i| format!("theta_{i}")).collect();
        cols.extend((1..=n_features).map(|i| format!("z_{i}")));
        cols.extend(["p0", "nu_s", "sigma2", "chain", "sweep"].map(String::from));
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header(self.n_features());
        out.push('\n');
        let n_g = self.n_g();
        for (i, s) in self.states.iter().enumerate() {
            for t in &s.theta {
                write!(out, "{t},").expect("string write");
            }
            for &z in &s.z {
                out.push_str(if z { "1," } else { "0," });
            }
            writeln!(out, "{},{},{},{},{}", s.p0, s.nu_s, s.sigma2, i / n_g, self.n_burn + i % n_g + 1)
                .expect("string write");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty posterior file".into()))?;
        let n_cols = header.split(',').count();
        if n_cols < 7 || (n_cols - 5) % 2 != 0 {
            return Err(Error::Config(format!("unexpected posterior header with {n_cols} columns")));
        }
        let n = (n_cols - 5) / 2;
        if header != Self::header(n) {
            return Err(Error::Config("posterior header does not match the documented layout".into()));
        }
        let mut states = Vec::new();
        let mut chains = Vec::new();
        let mut first_sweep = None;
        for (line_no, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let bad = |what: &str| Error::Config(format!("posterior row {}: {what}", line_no + 1));
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != n_cols {
                return Err(bad("wrong column count"));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad("invalid number"));
            let theta = fields[..n].iter().map(|s| float(s)).collect::<Result<Vec<_>>>()?;
            let z = fields[n..2 * n]
                .iter()
                .map(|s| match *s {
                    "0" => Ok(false),
                    "1" => Ok(true),
                    _ => Err(bad("indicator must be 0 or 1")),
                })
                .collect::<Result<Vec<_>>>()?;
            let chain: usize = fields[2 * n + 3].parse().map_err(|_| bad("invalid chain id"))?;
            let sweep: usize = fields[2 * n + 4].parse().map_err(|_| bad("invalid sweep id"))?;
            first_sweep.get_or_insert(sweep);
            chains.push(chain);
            states.push(ChainState {
                theta,
                z,
                p0: float(fields[2 * n])?,
                nu_s: float(fields[2 * n + 1])?,
                sigma2: float(fields[2 * n + 2])?,
            });
        }
        let n_chains = chains.last().map_or(0, |c| c + 1);
        let n_burn = first_sweep.unwrap_or(1).saturating_sub(1);
        let samples = Self::new(states, n_chains, n_burn)?;
        let n_g = samples.n_g();
        if chains.iter().enumerate().any(|(i, &c)| c != i / n_g) {
            return Err(Error::Config("chain ids are not contiguous equal-length blocks".into()));
        }
        Ok(samples)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_state(x: f64) -> ChainState {
        ChainState {
            theta: vec![x, 0.0, 1.0 / 3.0],
            z: vec![true, false, true],
            p0: 0.1 + x,
            nu_s: 2.5e-7,
            sigma2: std::f64::consts::PI * x,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let states = (1..=6).map(|k| sample_state(k as f64 * 0.123_456_789)).collect();
        let s = PosteriorSamples::new(states, 2, 250).unwrap();
        let text = s.to_csv();
        assert!(text.starts_with("theta_1,theta_2,theta_3,z_1,z_2,z_3,p0,nu_s,sigma2,chain,sweep\n"));
        assert!(text.lines().nth(4).unwrap().ends_with(",1,251"));
        assert_eq!(PosteriorSamples::from_csv(&text).unwrap(), s);
    }

    #[test]
    fn rejects_ragged_input() {
        assert!(PosteriorSamples::new(vec![sample_state(1.0); 3], 2, 0).is_err());
        assert!(PosteriorSamples::new(vec![], 1, 0).is_err());
        assert!(PosteriorSamples::from_csv("a,b\n").is_err());
        let mut text = PosteriorSamples::new(vec![sample_state(1.0)], 1, 0).unwrap().to_csv();
        text = text.replace(",1,0,1,", ",2,0,1,");
        assert!(PosteriorSamples::from_csv(&text).is_err());
    }
}
