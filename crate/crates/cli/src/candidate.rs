//! Candidate files: one component expression per line, `w1 = …` for a
//! vector field or `a1 = …` for a one-form, with scalars declared as
//! `param k` (value from --params) or `param k = 0.5` (overridable
//! default). Components may reference q1..qn and any declared param. Blank
//! lines and `#` comments are skipped.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use hjt_core::{CandidateVectorField, Real, SectionField, SectionKind, VectorFn, D1, D2, D3};
use hjt_core::hj_hamiltonian::CandidateOneForm;

use crate::expr::{self, Expr, Resolved};

pub struct CandidateFile {
    pub kind: SectionKind,
    pub comps: Vec<Expr>,
    pub params: BTreeMap<String, Option<f64>>,
}

pub fn load(path: &Path) -> Result<CandidateFile> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading candidate file {}", path.display()))?;
    let mut kind: Option<SectionKind> = None;
    let mut comps: BTreeMap<usize, Expr> = BTreeMap::new();
    let mut params: BTreeMap<String, Option<f64>> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("param ") {
            let (name, default) = match rest.split_once('=') {
                Some((n, v)) => {
                    let v: f64 = v.trim().parse().map_err(|_| {
                        anyhow!("line {}: bad param default `{}`", lineno + 1, v.trim())
                    })?;
                    (n.trim(), Some(v))
                }
                None => (rest.trim(), None),
            };
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                bail!("line {}: bad param name `{}`", lineno + 1, name);
            }
            params.insert(name.to_string(), default);
            continue;
        }
        let (lhs, rhs) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected `w<i> = expr` or `a<i> = expr`", lineno + 1))?;
        let lhs = lhs.trim();
        let this_kind = match lhs.chars().next() {
            Some('w') => SectionKind::Vector,
            Some('a') => SectionKind::OneForm,
            _ => bail!("line {}: component must start with `w` or `a`", lineno + 1),
        };
        let index: usize = lhs[1..]
            .parse()
            .map_err(|_| anyhow!("line {}: bad component index `{}`", lineno + 1, lhs))?;
        if index == 0 {
            bail!("line {}: component indices start at 1", lineno + 1);
        }
        match kind {
            None => kind = Some(this_kind),
            Some(k) if k != this_kind => {
                bail!("line {}: mixed `w` and `a` components", lineno + 1)
            }
            _ => {}
        }
        let ast = expr::parse(rhs.trim())
            .map_err(|e| anyhow!("line {}: {}", lineno + 1, e))?;
        if comps.insert(index, ast).is_some() {
            bail!("line {}: duplicate component {}", lineno + 1, lhs);
        }
    }
    let kind = kind.ok_or_else(|| anyhow!("no components in {}", path.display()))?;
    let n = *comps.keys().max().unwrap();
    let mut ordered = Vec::with_capacity(n);
    for i in 1..=n {
        ordered.push(
            comps
                .remove(&i)
                .ok_or_else(|| anyhow!("missing component {} of {}", i, n))?,
        );
    }
    Ok(CandidateFile { kind, comps: ordered, params })
}

struct ExprSection {
    comps: Vec<Resolved>,
}

impl ExprSection {
    fn apply<R: Real>(&self, x: &[R]) -> Vec<R> {
        self.comps.iter().map(|c| c.eval(x)).collect()
    }
}

impl VectorFn for ExprSection {
    fn eval0(&self, x: &[f64]) -> Vec<f64> {
        self.apply(x)
    }
    fn eval1(&self, x: &[D1]) -> Vec<D1> {
        self.apply(x)
    }
    fn eval2(&self, x: &[D2]) -> Vec<D2> {
        self.apply(x)
    }
    fn eval3(&self, x: &[D3]) -> Vec<D3> {
        self.apply(x)
    }
}

pub enum LoadedCandidate {
    Vector(CandidateVectorField),
    OneForm(CandidateOneForm),
}

/// Bind a candidate file to a system with `dof` coordinates q1..qn; values
/// in `overrides` fill (and override) the file's param defaults.
pub fn compile(
    file: &CandidateFile,
    name: &str,
    dof: usize,
    overrides: &BTreeMap<String, f64>,
) -> Result<LoadedCandidate> {
    if file.comps.len() != dof {
        bail!(
            "candidate has {} components but the system has {} degrees of freedom",
            file.comps.len(),
            dof
        );
    }
    let mut values: BTreeMap<String, f64> = BTreeMap::new();
    for (k, default) in &file.params {
        match overrides.get(k).copied().or(*default) {
            Some(v) => {
                values.insert(k.clone(), v);
            }
            None => bail!("param `{}` has no value; pass it via --params", k),
        }
    }
    let vars: BTreeMap<String, usize> =
        (0..dof).map(|i| (format!("q{}", i + 1), i)).collect();
    let mut comps = Vec::with_capacity(dof);
    for ast in &file.comps {
        comps.push(expr::resolve(ast, &vars, &values)?);
    }
    let section = SectionField::new(dof, file.kind, ExprSection { comps });
    Ok(match file.kind {
        SectionKind::Vector => LoadedCandidate::Vector(
            CandidateVectorField::new(name, section).with_params(values),
        ),
        SectionKind::OneForm => LoadedCandidate::OneForm(
            CandidateOneForm::new(name, section).with_params(values),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_file(dir: &tempfile::TempDir, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        let mut f = std::fs::File::create(&p).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        p
    }

    #[test]
    fn loads_a_vector_candidate_with_params() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(
            &dir,
            "xkl.cnd",
            "# rational family\nparam k = 1\nparam l\nw1 = k\nw2 = (k*q2 - l)/q1\n",
        );
        let file = load(&p).unwrap();
        assert_eq!(file.kind, SectionKind::Vector);
        assert_eq!(file.comps.len(), 2);
        let overrides: BTreeMap<String, f64> = [("l".to_string(), 0.5)].into_iter().collect();
        let built = compile(&file, "xkl", 2, &overrides).unwrap();
        let LoadedCandidate::Vector(c) = built else { panic!("expected vector") };
        let v = c.section.value(&[2.0, 1.0]).unwrap();
        assert_eq!(v, vec![1.0, 0.25]);
    }

    #[test]
    fn missing_param_and_missing_component_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "bad.cnd", "param c\nw1 = c\nw2 = q1\n");
        let file = load(&p).unwrap();
        let err = compile(&file, "bad", 2, &BTreeMap::new()).err().unwrap();
        assert!(err.to_string().contains("param `c` has no value"));

        let p = write_file(&dir, "gap.cnd", "w1 = q1\nw3 = q2\n");
        let err = load(&p).err().unwrap();
        assert!(err.to_string().contains("missing component 2"));

        let p = write_file(&dir, "mixed.cnd", "w1 = q1\na2 = q2\n");
        let err = load(&p).err().unwrap();
        assert!(err.to_string().contains("mixed"));
    }

    #[test]
    fn one_form_files_produce_one_form_candidates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_file(&dir, "alpha.cnd", "a1 = q1\na2 = q2^2\n");
        let file = load(&p).unwrap();
        let built = compile(&file, "alpha", 2, &BTreeMap::new()).unwrap();
        let LoadedCandidate::OneForm(a) = built else { panic!("expected one-form") };
        let v = a.section.value(&[3.0, -2.0]).unwrap();
        assert_eq!(v, vec![3.0, 4.0]);
    }
}
