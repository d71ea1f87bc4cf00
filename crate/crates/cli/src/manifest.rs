//! `manifest.txt`: a header, then `[config]`, `[constants]`, `[timing]` and
//! `[estimates]` sections. The config section is an ordinary config file.

use crate::config::{err_at, tokenize_lines, ExperimentConfig, ParseError};

pub const ESTIMATE_HEADER: &str = "method,t,value,stderr,samples";

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateRow {
    pub method: String,
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl EstimateRow {
    pub fn csv_row(&self) -> String {
        format!("{},{:?},{:?},{:?},{}", self.method, self.t, self.value, self.stderr, self.samples)
    }

    fn parse(line: usize, s: &str) -> Result<Self, ParseError> {
        let f: Vec<&str> = s.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(err_at(line, None, format!("estimate row needs 5 fields, found {}", f.len())));
        }
        let num = |i: usize, name: &str| -> Result<f64, ParseError> {
            f[i].parse::<f64>()
                .map_err(|_| err_at(line, Some(name), format!("`{}` is not a number", f[i])))
        };
        if f[0].is_empty() {
            return Err(err_at(line, Some("method"), "empty method"));
        }
        Ok(Self {
            method: f[0].to_string(),
            t: num(1, "t")?,
            value: num(2, "value")?,
            stderr: num(3, "stderr")?,
            samples: f[4]
                .parse()
                .map_err(|_| err_at(line, Some("samples"), format!("`{}` is not an integer", f[4])))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub threads: usize,
    pub config: ExperimentConfig,
    /// Derived constants by name.
    pub constants: Vec<(String, f64)>,
    /// Wall time per phase in seconds.
    pub timings: Vec<(String, f64)>,
    pub estimates: Vec<EstimateRow>,
}

impl RunManifest {
    pub fn to_text(&self) -> String {
        let mut s = String::from("# spde-moments run manifest\n");
        s += &format!("tool_version = {}\ncommand = {}\nthreads = {}\n", self.tool_version, self.command, self.threads);
        s += "\n[config]\n";
        s += &self.config.to_config_string();
        s += "\n[constants]\n";
        for (k, v) in &self.constants {
            s += &format!("{k} = {v:?}\n");
        }
        s += "\n[timing]\n";
        for (k, v) in &self.timings {
            s += &format!("{k} = {v:?}\n");
        }
        s += "\n[estimates]\n";
        s += ESTIMATE_HEADER;
        s.push('\n');
        for r in &self.estimates {
            s += &r.csv_row();
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, ParseError> {
        #[derive(PartialEq, Clone, Copy)]
        enum Sec {
            Header,
            Config,
            Constants,
            Timing,
            Estimates,
        }
        let mut sec = Sec::Header;
        let mut seen: Vec<&str> = Vec::new();
        let mut header = Vec::new();
        let mut config = Vec::new();
        let mut constants = Vec::new();
        let mut timing = Vec::new();
        let mut estimates = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                if seen.contains(&name) {
                    return Err(err_at(line, None, format!("duplicate section [{name}]")));
                }
                sec = match name {
                    "config" => Sec::Config,
                    "constants" => Sec::Constants,
                    "timing" => Sec::Timing,
                    "estimates" => Sec::Estimates,
                    _ => return Err(err_at(line, None, format!("unknown section [{name}]"))),
                };
                seen.push(name);
                continue;
            }
            match sec {
                Sec::Header => header.push((line, raw)),
                Sec::Config => config.push((line, raw)),
                Sec::Constants => constants.push((line, raw)),
                Sec::Timing => timing.push((line, raw)),
                Sec::Estimates => estimates.push((line, raw)),
            }
        }
        if !seen.contains(&"config") {
            return Err(err_at(0, None, "manifest has no [config] section"));
        }
        let header = tokenize_lines(header.into_iter())?;
        let get = |k: &str| -> Result<(usize, String), ParseError> {
            header
                .iter()
                .find(|p| p.1 == k)
                .map(|p| (p.0, p.2.clone()))
                .ok_or_else(|| err_at(0, Some(k), "missing from manifest header"))
        };
        let (_, tool_version) = get("tool_version")?;
        let (_, command) = get("command")?;
        let (tl, threads) = get("threads")?;
        let threads = threads
            .parse()
            .map_err(|_| err_at(tl, Some("threads"), format!("`{threads}` is not an integer")))?;
        let config = ExperimentConfig::from_pairs(&tokenize_lines(config.into_iter())?)?;
        let numbers = |lines: Vec<(usize, &str)>| -> Result<Vec<(String, f64)>, ParseError> {
            tokenize_lines(lines.into_iter())?
                .into_iter()
                .map(|(l, k, v)| match v.parse::<f64>() {
                    Ok(x) => Ok((k, x)),
                    Err(_) => Err(err_at(l, Some(&k), format!("`{v}` is not a number"))),
                })
                .collect()
        };
        let constants = numbers(constants)?;
        let timings = numbers(timing)?;
        let mut rows = Vec::new();
        let mut saw_header = false;
        for (l, raw) in estimates {
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if !saw_header {
                if s != ESTIMATE_HEADER {
                    return Err(err_at(l, None, format!("expected estimate header `{ESTIMATE_HEADER}`")));
                }
                saw_header = true;
                continue;
            }
            rows.push(EstimateRow::parse(l, s)?);
        }
        Ok(Self {
            tool_version,
            command,
            threads,
            config,
            constants,
            timings,
            estimates: rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> RunManifest {
        RunManifest {
            tool_version: "0.1.0".into(),
            command: "estimate".into(),
            threads: 2,
            config: ExperimentConfig {
                seed: Some(42),
                ..Default::default()
            },
            constants: vec![("alpha_H".into(), 0.375), ("rho".into(), 1.0 / 3.0)],
            timings: vec![("chaos_t0.5".into(), 0.25)],
            estimates: vec![EstimateRow {
                method: "chaos".into(),
                t: 0.5,
                value: 1.0242211,
                stderr: 2.6e-7,
                samples: 12345,
            }],
        }
    }

    #[test]
    fn text_round_trip() {
        let m = sample();
        assert_eq!(RunManifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn rejects_garbage() {
        assert!(RunManifest::parse("").is_err());
        assert!(RunManifest::parse("[config]\n[config]\n").is_err());
        let t = sample().to_text().replace("chaos,0.5", "chaos,zz");
        let e = RunManifest::parse(&t).unwrap_err();
        assert_eq!(e.key.as_deref(), Some("t"));
    }

    proptest! {
        #[test]
        fn numbers_round_trip(v in any::<f64>().prop_filter("finite", |x| x.is_finite()), n in any::<u64>()) {
            let mut m = sample();
            m.estimates[0].value = v;
            m.estimates[0].samples = n;
            m.constants[0].1 = v;
            let back = RunManifest::parse(&m.to_text()).unwrap();
            prop_assert_eq!(back.estimates[0].value.to_bits(), v.to_bits());
            prop_assert_eq!(back, m);
        }

        #[test]
        fn parser_never_panics(s in "\\PC{0,300}") {
            let _ = RunManifest::parse(&s);
        }
    }
}
