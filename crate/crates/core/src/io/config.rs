//! Run configuration in a flat `key = value` format with `[section]` headers.
//!
//! ```text
//! [potential]
//! kind = channel
//! delta_ch = 0.9
//!
//! [schedule]
//! c_rel = 0, 0.5
//! ```
//!
//! `#` starts a comment. Every key belongs to one section; unknown sections,
//! unknown keys and repeated keys are errors. `auto` is accepted for the
//! tolerances that have a derived default.

use crate::potential::Potential;
use std::fmt::Write as _;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("{}`{key}`: {message}", line.map_or(String::new(), |l| format!("line {l}: ")))]
    Invalid { line: Option<usize>, key: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialChoice {
    Gl,
    Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub potential: PotentialChoice,
    pub delta_ch: f64,
    pub eps_w: f64,
    /// Half-length and node count of the one-dimensional grid.
    pub lx: f64,
    pub n: usize,
    /// Half-length and node count of the strip's x-grid.
    pub strip_lx: f64,
    pub nx: usize,
    pub ly: f64,
    pub ny: usize,
    pub starts: usize,
    pub seed: String,
    /// Half-width of the square searched for the potential's constants.
    pub search_box: f64,
    pub constants_n: usize,
    pub el_tol: f64,
    /// Residual to which the minimisers are re-converged on the strip grid.
    pub level_el_tol: f64,
    pub v_tol: Option<f64>,
    pub neumann_tol: f64,
    pub constraint_tol: Option<f64>,
    pub boundary_tol: f64,
    pub cluster_eps: f64,
    pub strip_tol: f64,
    pub polish_tol: f64,
    pub c_rel: Vec<f64>,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            potential: PotentialChoice::Channel,
            delta_ch: 0.9,
            eps_w: 0.05,
            lx: 20.0,
            n: 2001,
            strip_lx: 20.0,
            nx: 201,
            ly: 40.0,
            ny: 321,
            starts: 10,
            seed: "strata".into(),
            search_box: 4.0,
            constants_n: 96,
            el_tol: 1e-8,
            level_el_tol: 1e-10,
            v_tol: None,
            neumann_tol: 1e-3,
            constraint_tol: None,
            boundary_tol: 1e-3,
            cluster_eps: 0.2,
            strip_tol: 1e-8,
            polish_tol: 1e-6,
            c_rel: vec![0.0, 0.5],
            out: PathBuf::from("out"),
        }
    }
}

const SECTIONS: [(&str, &[&str]); 6] = [
    ("potential", &["kind", "delta_ch", "eps_w"]),
    ("grid", &["lx", "n", "strip_lx", "nx", "ly", "ny"]),
    ("atlas", &["starts", "seed", "search_box", "constants_n"]),
    (
        "solver",
        &[
            "el_tol",
            "level_el_tol",
            "v_tol",
            "neumann_tol",
            "constraint_tol",
            "boundary_tol",
            "cluster_eps",
            "strip_tol",
            "polish_tol",
        ],
    ),
    ("schedule", &["c_rel"]),
    ("output", &["out"]),
];

/// FNV-1a hash; numeric labels are used as they are.
pub fn seed_from_label(label: &str) -> u64 {
    if let Ok(v) = label.parse::<u64>() {
        return v;
    }
    label.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

impl RunConfig {
    pub fn rng_seed(&self) -> u64 {
        seed_from_label(&self.seed)
    }

    pub fn build_potential(&self) -> Result<Potential, crate::potential::PotentialError> {
        match self.potential {
            PotentialChoice::Gl => Ok(Potential::GinzburgLandau),
            PotentialChoice::Channel => Potential::channel(self.delta_ch, self.eps_w),
        }
    }

    /// Set one field from its textual value. Keys are unqualified.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn real(v: &str) -> Result<f64, String> {
            let x: f64 = v.parse().map_err(|_| format!("malformed number `{v}`"))?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(format!("`{v}` is not finite"))
            }
        }
        fn count(v: &str) -> Result<usize, String> {
            v.parse().map_err(|_| format!("malformed integer `{v}`"))
        }
        fn auto(v: &str) -> Result<Option<f64>, String> {
            if v == "auto" {
                Ok(None)
            } else {
                real(v).map(Some)
            }
        }
        match key {
            "kind" => {
                self.potential = match value {
                    "gl" => PotentialChoice::Gl,
                    "channel" => PotentialChoice::Channel,
                    _ => return Err(format!("expected `gl` or `channel`, got `{value}`")),
                }
            }
            "delta_ch" => self.delta_ch = real(value)?,
            "eps_w" => self.eps_w = real(value)?,
            "lx" => self.lx = real(value)?,
            "n" => self.n = count(value)?,
            "strip_lx" => self.strip_lx = real(value)?,
            "nx" => self.nx = count(value)?,
            "ly" => self.ly = real(value)?,
            "ny" => self.ny = count(value)?,
            "starts" => self.starts = count(value)?,
            "seed" => {
                if value.is_empty() || value.contains(['#', '\n']) {
                    return Err(format!("invalid seed label `{value}`"));
                }
                self.seed = value.to_string()
            }
            "search_box" => self.search_box = real(value)?,
            "constants_n" => self.constants_n = count(value)?,
            "el_tol" => self.el_tol = real(value)?,
            "level_el_tol" => self.level_el_tol = real(value)?,
            "v_tol" => self.v_tol = auto(value)?,
            "neumann_tol" => self.neumann_tol = real(value)?,
            "constraint_tol" => self.constraint_tol = auto(value)?,
            "boundary_tol" => self.boundary_tol = real(value)?,
            "cluster_eps" => self.cluster_eps = real(value)?,
            "strip_tol" => self.strip_tol = real(value)?,
            "polish_tol" => self.polish_tol = real(value)?,
            "c_rel" => {
                self.c_rel = value
                    .split(',')
                    .map(|s| real(s.trim()))
                    .collect::<Result<_, _>>()?
            }
            "out" => {
                if value.is_empty() || value.contains(['#', '\n']) {
                    return Err(format!("invalid output directory `{value}`"));
                }
                self.out = PathBuf::from(value)
            }
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Check the invariants: positive tolerances, odd node counts, `c_rel` in `[0, 1]`.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, message: String| Err(ConfigError::Invalid { line: None, key: key.into(), message });
        for (key, n) in [("n", self.n), ("nx", self.nx)] {
            if n % 2 == 0 {
                return bad(key, format!("must be odd, got {n}"));
            }
        }
        if self.ny < 3 {
            return bad("ny", format!("need at least 3 slices, got {}", self.ny));
        }
        let tolerances = [
            ("el_tol", Some(self.el_tol)),
            ("level_el_tol", Some(self.level_el_tol)),
            ("v_tol", self.v_tol),
            ("neumann_tol", Some(self.neumann_tol)),
            ("constraint_tol", self.constraint_tol),
            ("boundary_tol", Some(self.boundary_tol)),
            ("cluster_eps", Some(self.cluster_eps)),
            ("strip_tol", Some(self.strip_tol)),
            ("polish_tol", Some(self.polish_tol)),
        ];
        for (key, t) in tolerances {
            if let Some(t) = t {
                if t <= 0.0 {
                    return bad(key, format!("must be positive, got {t}"));
                }
            }
        }
        for (key, l) in [("lx", self.lx), ("strip_lx", self.strip_lx), ("ly", self.ly), ("search_box", self.search_box)] {
            if l <= 0.0 {
                return bad(key, format!("must be positive, got {l}"));
            }
        }
        if self.c_rel.is_empty() {
            return bad("c_rel", "empty schedule".into());
        }
        if let Some(c) = self.c_rel.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return bad("c_rel", format!("values must lie in [0, 1], got {c}"));
        }
        if self.potential == PotentialChoice::Channel && self.delta_ch <= 0.0 {
            return bad("delta_ch", format!("must be positive, got {}", self.delta_ch));
        }
        if self.eps_w < 0.0 {
            return bad("eps_w", format!("must be non-negative, got {}", self.eps_w));
        }
        Ok(())
    }

    /// Text that [`parse_config`] reads back to an equal config.
    pub fn serialize(&self) -> String {
        let auto = |v: Option<f64>| v.map_or("auto".to_string(), |v| format!("{v:?}"));
        let mut s = String::new();
        let kind = match self.potential {
            PotentialChoice::Gl => "gl",
            PotentialChoice::Channel => "channel",
        };
        let _ = writeln!(s, "[potential]\nkind = {kind}\ndelta_ch = {:?}\neps_w = {:?}\n", self.delta_ch, self.eps_w);
        let _ = writeln!(
            s,
            "[grid]\nlx = {:?}\nn = {}\nstrip_lx = {:?}\nnx = {}\nly = {:?}\nny = {}\n",
            self.lx, self.n, self.strip_lx, self.nx, self.ly, self.ny
        );
        let _ = writeln!(
            s,
            "[atlas]\nstarts = {}\nseed = {}\nsearch_box = {:?}\nconstants_n = {}\n",
            self.starts, self.seed, self.search_box, self.constants_n
        );
        let _ = writeln!(
            s,
            "[solver]\nel_tol = {:?}\nlevel_el_tol = {:?}\nv_tol = {}\nneumann_tol = {:?}\nconstraint_tol = {}\n\
             boundary_tol = {:?}\ncluster_eps = {:?}\nstrip_tol = {:?}\npolish_tol = {:?}\n",
            self.el_tol,
            self.level_el_tol,
            auto(self.v_tol),
            self.neumann_tol,
            auto(self.constraint_tol),
            self.boundary_tol,
            self.cluster_eps,
            self.strip_tol,
            self.polish_tol
        );
        let c: Vec<String> = self.c_rel.iter().map(|c| format!("{c:?}")).collect();
        let _ = writeln!(s, "[schedule]\nc_rel = {}\n", c.join(", "));
        let _ = writeln!(s, "[output]\nout = {}", self.out.display());
        s
    }
}

/// Parse and validate; missing keys keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section: Option<&str> = None;
    let mut seen: Vec<(String, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("unterminated section header `{content}`") })?
                .trim();
            let known = SECTIONS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| ConfigError::Syntax { line, message: format!("unknown section [{name}]") })?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, message: format!("expected `key = value`, got `{content}`") })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section else {
            return Err(ConfigError::Syntax { line, message: format!("key `{key}` outside any section") });
        };
        let keys = SECTIONS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !keys.contains(&key) {
            return Err(ConfigError::UnknownKey { line, section: sec.into(), key: key.into() });
        }
        if seen.iter().any(|(s, k, _)| s == sec && k == key) {
            return Err(ConfigError::Value { line, key: key.into(), message: "repeated key".into() });
        }
        seen.push((sec.into(), key.into(), line));
        cfg.set(key, value).map_err(|message| ConfigError::Value { line, key: key.into(), message })?;
    }
    cfg.validate().map_err(|e| match e {
        ConfigError::Invalid { key, message, .. } => {
            let line = seen.iter().find(|(_, k, _)| *k == key).map(|(_, _, l)| *l);
            ConfigError::Invalid { line, key, message }
        }
        other => other,
    })?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# nothing\n\n").unwrap(), RunConfig::default());
    }

    #[test]
    fn even_node_count_is_rejected_with_its_line() {
        let err = parse_config("[grid]\nlx = 10\nn = 2000\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Invalid { line: Some(3), key: "n".into(), message: "must be odd, got 2000".into() }
        );
        assert!(err.to_string().starts_with("line 3: `n`"));
    }

    #[test]
    fn schedule_list_is_split() {
        let cfg = parse_config("[schedule]\nc_rel = 0.25,0.5,0.75\n").unwrap();
        assert_eq!(cfg.c_rel, vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn errors_name_key_and_line() {
        match parse_config("[solver]\nel_tol = 1e-8\nfoo = 1\n") {
            Err(ConfigError::UnknownKey { line: 3, key, .. }) => assert_eq!(key, "foo"),
            other => panic!("{other:?}"),
        }
        match parse_config("[grid]\n\nlx = abc\n") {
            Err(ConfigError::Value { line: 3, key, .. }) => assert_eq!(key, "lx"),
            other => panic!("{other:?}"),
        }
        match parse_config("[solver]\nneumann_tol = -1\n") {
            Err(ConfigError::Invalid { line: Some(2), key, .. }) => assert_eq!(key, "neumann_tol"),
            other => panic!("{other:?}"),
        }
        match parse_config("[schedule]\nc_rel = 0.5, 1.5\n") {
            Err(ConfigError::Invalid { key, .. }) => assert_eq!(key, "c_rel"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse_config("lx = 1\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("[nope]\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("[grid\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("[grid]\nlx 3\n"), Err(ConfigError::Syntax { line: 2, .. })));
        assert!(matches!(
            parse_config("[grid]\nlx = 3\nlx = 4\n"),
            Err(ConfigError::Value { line: 3, .. })
        ));
    }

    #[test]
    fn auto_and_comments() {
        let cfg = parse_config("[solver] # tolerances\nv_tol = auto\nconstraint_tol = 1e-4 # explicit\n").unwrap();
        assert_eq!(cfg.v_tol, None);
        assert_eq!(cfg.constraint_tol, Some(1e-4));
    }

    #[test]
    fn seed_labels_are_stable() {
        assert_eq!(seed_from_label("42"), 42);
        assert_eq!(seed_from_label(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(seed_from_label("a"), 0xaf63_dc4c_8601_ec8c);
        assert_ne!(seed_from_label("strata"), seed_from_label("strata2"));
    }

    fn positive() -> impl Strategy<Value = f64> {
        (1e-12f64..1e3).prop_map(|x| x)
    }

    prop_compose! {
        fn any_config()(
            gl in any::<bool>(),
            delta_ch in positive(),
            eps_w in 0.0f64..1.0,
            lx in positive(),
            n in 64usize..5000,
            nx in 64usize..5000,
            ly in positive(),
            ny in 3usize..2000,
            starts in 1usize..100,
            seed in "[a-z0-9_]{1,12}",
            tols in proptest::collection::vec(positive(), 7),
            v_tol in proptest::option::of(positive()),
            constraint_tol in proptest::option::of(positive()),
            c_rel in proptest::collection::vec(0.0f64..=1.0, 1..6),
            out in "[a-z][a-z0-9_/]{0,15}",
        ) -> RunConfig {
            RunConfig {
                potential: if gl { PotentialChoice::Gl } else { PotentialChoice::Channel },
                delta_ch,
                eps_w,
                lx,
                n: 2 * n + 1,
                strip_lx: lx * 0.5,
                nx: 2 * nx + 1,
                ly,
                ny,
                starts,
                seed,
                search_box: 4.0,
                constants_n: 64,
                el_tol: tols[0],
                level_el_tol: tols[1],
                v_tol,
                neumann_tol: tols[2],
                constraint_tol,
                boundary_tol: tols[3],
                cluster_eps: tols[4],
                strip_tol: tols[5],
                polish_tol: tols[6],
                c_rel,
                out: PathBuf::from(out),
            }
        }
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(cfg in any_config()) {
            let text = cfg.serialize();
            let back = parse_config(&text).unwrap();
            prop_assert_eq!(&back, &cfg);
            prop_assert_eq!(parse_config(&back.serialize()).unwrap(), back);
        }
    }
}
