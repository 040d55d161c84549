//! Sources of binary responses for the search: simulated, scripted, or typed
//! in by an operator.

use std::collections::VecDeque;
use std::io::{BufRead, Write};

use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::response_models::{LinkParams, ModelKind};
use crate::rng::stream;

/// Measures `n` binary responses at factor level `x` and returns the number
/// of successes.
pub trait ResponseOracle {
    fn measure(&mut self, x: f64, n: u64) -> Result<u64>;
}

impl<F> ResponseOracle for F
where
    F: FnMut(f64, u64) -> Result<u64>,
{
    fn measure(&mut self, x: f64, n: u64) -> Result<u64> {
        self(x, n)
    }
}

/// Bernoulli draws from a known response curve.
///
/// Each call uses its own keyed stream `(seed, call index)`, so an oracle
/// rebuilt with [`SimulatedOracle::resume_at`] continues exactly where an
/// interrupted one stopped.
#[derive(Debug, Clone)]
pub struct SimulatedOracle {
    model: ModelKind,
    params: LinkParams,
    seed: u64,
    calls: u64,
}

impl SimulatedOracle {
    pub fn new(model: ModelKind, params: LinkParams, seed: u64) -> Self {
        Self { model, params, seed, calls: 0 }
    }

    pub fn resume_at(mut self, calls: u64) -> Self {
        self.calls = calls;
        self
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }
}

impl ResponseOracle for SimulatedOracle {
    fn measure(&mut self, x: f64, n: u64) -> Result<u64> {
        let p = self.model.prob(self.params.eta(x));
        let mut rng = stream(self.seed, &[self.calls]);
        self.calls += 1;
        let dist = Binomial::new(n, p)
            .map_err(|e| Error::Oracle(format!("bad binomial parameters n={n}, p={p}: {e}")))?;
        Ok(dist.sample(&mut rng))
    }
}

/// Replays a fixed sequence of individual responses; each stage consumes `n`.
#[derive(Debug, Clone, Default)]
pub struct ScriptedOracle {
    responses: VecDeque<bool>,
}

impl ScriptedOracle {
    pub fn new(responses: impl IntoIterator<Item = bool>) -> Self {
        Self { responses: responses.into_iter().collect() }
    }

    /// Parses whitespace/comma separated tokens. `0` and `1` are single
    /// responses; `k/n` stands for a whole stage (`k` ones then `n - k` zeros).
    pub fn parse(script: &str) -> Result<Self> {
        let mut responses = Vec::new();
        for token in script
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split(|c: char| c.is_whitespace() || c == ','))
            .filter(|t| !t.is_empty())
        {
            match token {
                "0" => responses.push(false),
                "1" => responses.push(true),
                t => {
                    let (k, n) = parse_fraction(t).map_err(|e| {
                        Error::InvalidArgument(format!("bad script token `{t}`: {e}"))
                    })?;
                    responses.extend((0..n).map(|i| i < k));
                }
            }
        }
        Ok(Self::new(responses))
    }

    /// Script whose first `skip` responses were already consumed.
    pub fn skip(mut self, skip: usize) -> Self {
        let skip = skip.min(self.responses.len());
        self.responses.drain(..skip);
        self
    }

    pub fn remaining(&self) -> usize {
        self.responses.len()
    }
}

impl ResponseOracle for ScriptedOracle {
    fn measure(&mut self, _x: f64, n: u64) -> Result<u64> {
        let n = n as usize;
        if self.responses.len() < n {
            return Err(Error::Oracle(format!(
                "script exhausted: {n} responses requested, {} left",
                self.responses.len()
            )));
        }
        Ok(self.responses.drain(..n).filter(|&r| r).count() as u64)
    }
}

/// Parses a `k/n` reply.
pub fn parse_fraction(s: &str) -> std::result::Result<(u64, u64), String> {
    let (k, n) = s.trim().split_once('/').ok_or("expected the form k/n")?;
    let k: u64 = k.trim().parse().map_err(|_| format!("`{}` is not a count", k.trim()))?;
    let n: u64 = n.trim().parse().map_err(|_| format!("`{}` is not a count", n.trim()))?;
    if n == 0 {
        return Err("n must be positive".into());
    }
    if k > n {
        return Err(format!("{k} successes out of {n} trials"));
    }
    Ok((k, n))
}

/// Asks an operator for each stage's result as `k/n`; unparsable replies are
/// re-prompted without consuming a stage.
pub struct InteractiveOracle<R, W> {
    input: R,
    output: W,
    stage: usize,
}

impl<R: BufRead, W: Write> InteractiveOracle<R, W> {
    pub fn new(input: R, output: W) -> Self {
        Self { input, output, stage: 0 }
    }

    /// Stage counter used in prompts (1-based for the next prompt).
    pub fn starting_at(mut self, completed_stages: usize) -> Self {
        self.stage = completed_stages;
        self
    }
}

impl<R: BufRead, W: Write> ResponseOracle for InteractiveOracle<R, W> {
    fn measure(&mut self, x: f64, n: u64) -> Result<u64> {
        self.stage += 1;
        loop {
            write!(
                self.output,
                "stage {}: measure {n} responses at x = {x}; enter successes as k/{n}: ",
                self.stage
            )?;
            self.output.flush()?;
            let mut line = String::new();
            if self.input.read_line(&mut line)? == 0 {
                return Err(Error::Oracle("input closed before the stage was answered".into()));
            }
            match parse_fraction(&line) {
                Ok((k, m)) if m == n => return Ok(k),
                Ok((_, m)) => writeln!(self.output, "expected {n} trials, got {m}; try again")?,
                Err(e) => writeln!(self.output, "could not parse `{}`: {e}; try again", line.trim())?,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulated_oracle_is_reproducible_and_resumable() {
        let params = LinkParams::canonical();
        let mut a = SimulatedOracle::new(ModelKind::Cloglog, params, 9);
        let full: Vec<u64> = (0..6).map(|i| a.measure(i as f64 - 3.0, 20).unwrap()).collect();
        let mut b = SimulatedOracle::new(ModelKind::Cloglog, params, 9).resume_at(3);
        let tail: Vec<u64> = (3..6).map(|i| b.measure(i as f64 - 3.0, 20).unwrap()).collect();
        assert_eq!(&full[3..], &tail[..]);
        assert!(full.iter().all(|&k| k <= 20));
    }

    #[test]
    fn simulated_oracle_saturates_in_tails() {
        let mut o = SimulatedOracle::new(ModelKind::Logit, LinkParams::canonical(), 1);
        assert_eq!(o.measure(-100.0, 50).unwrap(), 0);
        assert_eq!(o.measure(100.0, 50).unwrap(), 50);
    }

    #[test]
    fn scripted_oracle_consumes_responses() {
        let mut o = ScriptedOracle::parse("0 1 1\n2/3 # comment\n1,0").unwrap();
        assert_eq!(o.remaining(), 8);
        assert_eq!(o.measure(0.0, 3).unwrap(), 2);
        assert_eq!(o.measure(0.0, 3).unwrap(), 2);
        assert!(matches!(o.measure(0.0, 3), Err(Error::Oracle(_))));
        assert_eq!(o.remaining(), 2);
        assert!(ScriptedOracle::parse("0 2").is_err());
        assert!(ScriptedOracle::parse("4/3").is_err());
    }

    #[test]
    fn interactive_oracle_reprompts() {
        let input = b"garbage\n3/4\n2/5\n".as_slice();
        let mut out = Vec::new();
        let mut o = InteractiveOracle::new(input, &mut out);
        assert_eq!(o.measure(1.5, 5).unwrap(), 2);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.matches("stage 1:").count(), 3);
        assert!(text.contains("could not parse"));
        assert!(text.contains("expected 5 trials"));
    }

    #[test]
    fn interactive_oracle_reports_eof() {
        let mut out = Vec::new();
        let mut o = InteractiveOracle::new(b"".as_slice(), &mut out);
        assert!(o.measure(0.0, 2).is_err());
    }

    #[test]
    fn fraction_parsing() {
        assert_eq!(parse_fraction(" 3 / 5 "), Ok((3, 5)));
        assert!(parse_fraction("6/5").is_err());
        assert!(parse_fraction("1/0").is_err());
        assert!(parse_fraction("3").is_err());
    }
}
