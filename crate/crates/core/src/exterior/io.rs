//! Form JSON files and grid CSV files.
//!
//! A form file is `{degree, terms: [{blades, coeff}]}` with 1-based blade
//! indices. A coefficient is an exact rational (`"p/q"`, an integer or a
//! decimal, as string or number), a polynomial term list
//! `[{exponents: [e1..e6], coeff}]`, or a trigonometric term list
//! `[{freq: [k1..k6], cos, sin}]` meaning `Σ cos·cos(k·x) + sin·sin(k·x)`.
//!
//! A grid file starts with the header record `axes,N,degree,blade-list`,
//! followed by one record of values (axes 1-based and `;`-separated, blades as
//! digit strings such as `135`, the scalar blade as `0`), followed by one row
//! per node in row-major order with one column per blade.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use super::blade::{Blade, DIM};
use super::form::{ConstForm, FloatForm, Form, GridForm, PolyForm, TrigForm};
use super::grid::{GridScalar, GridShape};
use super::poly::PolyScalar;
use super::scalar::{format_rational, parse_rational, rat, Rational};
use super::trig::TrigScalar;
use crate::error::{CoreError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RationalText {
    Text(String),
    Number(f64),
}

impl RationalText {
    pub fn parse(&self) -> Result<Rational> {
        match self {
            RationalText::Text(s) => parse_rational(s),
            RationalText::Number(x) => {
                if !x.is_finite() {
                    return Err(CoreError::Parse(format!("non-finite coefficient {x}")));
                }
                parse_rational(&format!("{x:e}"))
            }
        }
    }

    fn exact(r: &Rational) -> Self {
        RationalText::Text(format_rational(r))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyTermFile {
    pub exponents: [u8; DIM],
    pub coeff: RationalText,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrigTermFile {
    pub freq: [i32; DIM],
    #[serde(default = "zero_text")]
    pub cos: RationalText,
    #[serde(default = "zero_text")]
    pub sin: RationalText,
}

fn zero_text() -> RationalText {
    RationalText::Text("0".into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoeffFile {
    Scalar(RationalText),
    Poly(Vec<PolyTermFile>),
    Trig(Vec<TrigTermFile>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TermFile {
    pub blades: Vec<usize>,
    pub coeff: CoeffFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormFile {
    pub degree: usize,
    pub terms: Vec<TermFile>,
}

/// Whether a file's coefficients need the trigonometric backend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoeffKind {
    Constant,
    Polynomial,
    Trigonometric,
}

impl FormFile {
    pub fn read(path: &Path) -> Result<FormFile> {
        let mut s = String::new();
        std::fs::File::open(path)?.read_to_string(&mut s)?;
        Self::parse(&s)
    }

    pub fn parse(s: &str) -> Result<FormFile> {
        let f: FormFile = serde_json::from_str(s)?;
        f.validate()?;
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("form files always serialize")
    }

    fn validate(&self) -> Result<()> {
        if self.degree > DIM {
            return Err(CoreError::Parse(format!("degree {} exceeds 6", self.degree)));
        }
        for t in &self.terms {
            if t.blades.len() != self.degree {
                return Err(CoreError::DegreeMismatch {
                    expected: self.degree,
                    found: t.blades.len(),
                });
            }
            Blade::from_indices(&t.blades)?;
        }
        Ok(())
    }

    pub fn kind(&self) -> CoeffKind {
        let mut kind = CoeffKind::Constant;
        for t in &self.terms {
            match t.coeff {
                CoeffFile::Trig(_) => return CoeffKind::Trigonometric,
                CoeffFile::Poly(_) => kind = CoeffKind::Polynomial,
                CoeffFile::Scalar(_) => {}
            }
        }
        kind
    }

    fn blade(&self, t: &TermFile) -> Result<Blade> {
        if self.degree == 0 {
            return Ok(Blade::SCALAR);
        }
        Blade::from_indices(&t.blades)
    }

    pub fn to_poly(&self) -> Result<PolyForm> {
        let mut out = PolyForm::zero(self.degree);
        for t in &self.terms {
            let c = match &t.coeff {
                CoeffFile::Scalar(r) => PolyScalar::constant(r.parse()?),
                CoeffFile::Poly(terms) => {
                    let mut p = PolyScalar::zero();
                    for term in terms {
                        p.add_term(term.exponents, term.coeff.parse()?);
                    }
                    p
                }
                CoeffFile::Trig(_) => {
                    return Err(CoreError::Parse(
                        "trigonometric coefficient where a polynomial was expected".into(),
                    ))
                }
            };
            out.add_term(self.blade(t)?, c);
        }
        Ok(out)
    }

    pub fn to_trig(&self) -> Result<TrigForm> {
        let mut out = TrigForm::zero(self.degree);
        for t in &self.terms {
            let c = match &t.coeff {
                CoeffFile::Scalar(r) => TrigScalar::constant(r.parse()?),
                CoeffFile::Trig(terms) => {
                    let mut acc = TrigScalar::zero();
                    for term in terms {
                        let part =
                            TrigScalar::cos_sin(term.freq, term.cos.parse()?, term.sin.parse()?);
                        for (k, (re, im)) in part.terms() {
                            acc.add_term(*k, re.clone(), im.clone());
                        }
                    }
                    acc
                }
                CoeffFile::Poly(terms) => {
                    // constant polynomials are admissible
                    let mut p = PolyScalar::zero();
                    for term in terms {
                        p.add_term(term.exponents, term.coeff.parse()?);
                    }
                    let c = p.as_constant().ok_or_else(|| {
                        CoreError::Parse(
                            "polynomial coefficient where a trigonometric one was expected".into(),
                        )
                    })?;
                    TrigScalar::constant(c)
                }
            };
            out.add_term(self.blade(t)?, c);
        }
        Ok(out)
    }

    pub fn to_const(&self) -> Result<ConstForm> {
        let p = self.to_poly()?;
        let mut out = ConstForm::zero(self.degree);
        for (b, c) in p.terms() {
            let v = c
                .as_constant()
                .ok_or_else(|| CoreError::Parse("expected constant coefficients".into()))?;
            out.add_term(*b, v);
        }
        Ok(out)
    }

    pub fn from_const(f: &ConstForm) -> FormFile {
        Self::build(f, |c| CoeffFile::Scalar(RationalText::exact(c)))
    }

    pub fn from_float(f: &FloatForm) -> FormFile {
        Self::build(f, |c| CoeffFile::Scalar(RationalText::Number(*c)))
    }

    pub fn from_poly(f: &PolyForm) -> FormFile {
        Self::build(f, |p| match p.as_constant() {
            Some(c) => CoeffFile::Scalar(RationalText::exact(&c)),
            None => CoeffFile::Poly(
                p.terms()
                    .map(|(e, c)| PolyTermFile {
                        exponents: *e,
                        coeff: RationalText::exact(c),
                    })
                    .collect(),
            ),
        })
    }

    pub fn from_trig(f: &TrigForm) -> FormFile {
        Self::build(f, |t| CoeffFile::Trig(trig_terms(t)))
    }

    fn build<C: super::scalar::Coefficient>(
        f: &Form<C>,
        coeff: impl Fn(&C) -> CoeffFile,
    ) -> FormFile {
        FormFile {
            degree: f.degree(),
            terms: f
                .terms()
                .map(|(b, c)| TermFile {
                    blades: b.indices(),
                    coeff: coeff(c),
                })
                .collect(),
        }
    }
}

/// Real cosine/sine terms of a real trigonometric series, one per frequency
/// pair `{k, −k}` (the representative is the lexicographically larger one).
fn trig_terms(t: &TrigScalar) -> Vec<TrigTermFile> {
    let mut out = Vec::new();
    for (k, (re, im)) in t.terms() {
        let neg: [i32; DIM] = std::array::from_fn(|i| -k[i]);
        if *k == [0; DIM] {
            out.push(TrigTermFile {
                freq: *k,
                cos: RationalText::exact(re),
                sin: zero_text(),
            });
        } else if *k > neg {
            // c e^{ikx} + conj(c) e^{-ikx} = 2Re(c) cos(kx) − 2Im(c) sin(kx)
            let two = rat(2, 1);
            out.push(TrigTermFile {
                freq: *k,
                cos: RationalText::exact(&(re * &two)),
                sin: RationalText::exact(&(-(im * &two))),
            });
        }
    }
    out
}

/// Degree-0 file as a polynomial scalar.
pub fn read_poly_scalar(path: &Path) -> Result<PolyScalar> {
    scalar_of(FormFile::read(path)?.to_poly()?)
}

fn scalar_of<C: super::scalar::Coefficient>(f: Form<C>) -> Result<C> {
    if f.degree() != 0 {
        return Err(CoreError::DegreeMismatch {
            expected: 0,
            found: f.degree(),
        });
    }
    f.coeff(Blade::SCALAR)
        .cloned()
        .ok_or_else(|| CoreError::Parse("empty scalar file".into()))
}

/// A scalar potential read from a degree-0 file.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Poly(PolyScalar),
    Trig(TrigScalar),
}

impl Potential {
    pub fn from_file(f: &FormFile) -> Result<Potential> {
        if f.degree != 0 {
            return Err(CoreError::DegreeMismatch {
                expected: 0,
                found: f.degree,
            });
        }
        if f.terms.is_empty() {
            return Ok(Potential::Poly(PolyScalar::zero()));
        }
        match f.kind() {
            CoeffKind::Trigonometric => Ok(Potential::Trig(scalar_of(f.to_trig()?)?)),
            _ => Ok(Potential::Poly(scalar_of(f.to_poly()?)?)),
        }
    }

    pub fn read(path: &Path) -> Result<Potential> {
        Self::from_file(&FormFile::read(path)?)
    }
}

fn blade_label(b: Blade) -> String {
    if b.degree() == 0 {
        "0".into()
    } else {
        b.indices().iter().map(|i| i.to_string()).collect()
    }
}

fn parse_blade_label(s: &str) -> Result<Blade> {
    if s == "0" {
        return Ok(Blade::SCALAR);
    }
    let idx: Vec<usize> = s
        .chars()
        .map(|c| {
            c.to_digit(10)
                .map(|d| d as usize)
                .ok_or_else(|| CoreError::Parse(format!("bad blade label {s:?}")))
        })
        .collect::<Result<_>>()?;
    Blade::from_indices(&idx)
}

/// Writes a grid form. Every blade of the form's degree that has a stored
/// coefficient gets a column.
pub fn write_grid_csv<W: Write>(form: &GridForm, shape: &GridShape, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["axes", "N", "degree", "blade-list"])?;
    let blades: Vec<Blade> = form.terms().map(|(b, _)| *b).collect();
    let axes: Vec<String> = shape.axes().iter().map(|a| (a + 1).to_string()).collect();
    let labels: Vec<String> = blades.iter().map(|b| blade_label(*b)).collect();
    w.write_record([
        axes.join(";"),
        shape.n().to_string(),
        form.degree().to_string(),
        labels.join(";"),
    ])?;
    let cols: Vec<&GridScalar> = form.terms().map(|(_, c)| c).collect();
    for node in 0..shape.len() {
        let row: Vec<String> = cols.iter().map(|c| format!("{:e}", c.data()[node])).collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: Read>(input: R) -> Result<(GridShape, GridForm)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = r.records();
    let header = records
        .next()
        .ok_or_else(|| CoreError::Parse("empty grid file".into()))??;
    if header.iter().collect::<Vec<_>>() != ["axes", "N", "degree", "blade-list"] {
        return Err(CoreError::Parse("missing grid header axes,N,degree,blade-list".into()));
    }
    let meta = records
        .next()
        .ok_or_else(|| CoreError::Parse("missing grid metadata record".into()))??;
    if meta.len() != 4 {
        return Err(CoreError::Parse("grid metadata needs 4 fields".into()));
    }
    let bad = |what: &str| CoreError::Parse(format!("bad grid {what}"));
    let axes: Vec<usize> = meta[0]
        .split(';')
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse::<usize>().ok().filter(|a| (1..=DIM).contains(a)).map(|a| a - 1))
        .collect::<Option<_>>()
        .ok_or_else(|| bad("axes"))?;
    let n: usize = meta[1].trim().parse().map_err(|_| bad("N"))?;
    let degree: usize = meta[2].trim().parse().map_err(|_| bad("degree"))?;
    let blades: Vec<Blade> = meta[3]
        .split(';')
        .filter(|s| !s.is_empty())
        .map(parse_blade_label)
        .collect::<Result<_>>()?;
    if blades.iter().any(|b| b.degree() != degree) {
        return Err(bad("blade degree"));
    }
    let shape = GridShape::new(axes, n)?;
    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(shape.len()); blades.len()];
    for rec in records {
        let rec = rec?;
        if rec.len() != blades.len() {
            return Err(bad("row width"));
        }
        for (col, field) in columns.iter_mut().zip(rec.iter()) {
            col.push(field.trim().parse().map_err(|_| bad("value"))?);
        }
    }
    let mut form = GridForm::zero(degree);
    let mut seen = BTreeMap::new();
    for (b, data) in blades.into_iter().zip(columns) {
        if seen.insert(b, ()).is_some() {
            return Err(bad("duplicate blade"));
        }
        let g = GridScalar::new(shape.clone(), data)?;
        if !g.data().iter().all(|v| v.is_zero()) {
            form.add_term(b, g);
        }
    }
    Ok((shape, form))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::scalar::int;
    use crate::exterior::standard_structures;

    #[test]
    fn constant_round_trip() {
        let rho = standard_structures().rho0.scaled(&rat(3, 7));
        let text = FormFile::from_const(&rho).to_json();
        assert_eq!(FormFile::parse(&text).unwrap().to_const().unwrap(), rho);
    }

    #[test]
    fn polynomial_and_trig_round_trip() {
        let p = PolyScalar::sum_of_squares().scale(&rat(1, 3)) + PolyScalar::var(2);
        let f: PolyForm = Form::function(p);
        let back = FormFile::parse(&FormFile::from_poly(&f).to_json()).unwrap();
        assert_eq!(back.to_poly().unwrap(), f);

        let t = TrigScalar::cos_sin([1, 0, 1, 0, 0, 0], rat(1, 10), rat(-2, 5));
        let g: TrigForm = Form::function(t.clone());
        let back = FormFile::parse(&FormFile::from_trig(&g).to_json()).unwrap();
        assert_eq!(back.kind(), CoeffKind::Trigonometric);
        assert_eq!(Potential::from_file(&back).unwrap(), Potential::Trig(t));
    }

    #[test]
    fn decimal_and_numeric_coefficients() {
        let text = r#"{"degree":3,"terms":[{"blades":[1,3,5],"coeff":0.5},{"blades":[2,4,6],"coeff":"-1/4"}]}"#;
        let f = FormFile::parse(text).unwrap().to_const().unwrap();
        assert_eq!(f.coeff(Blade::from_indices(&[1, 3, 5]).unwrap()), Some(&rat(1, 2)));
        assert_eq!(f.coeff(Blade::from_indices(&[2, 4, 6]).unwrap()), Some(&rat(-1, 4)));
    }

    #[test]
    fn malformed_files_rejected() {
        assert!(FormFile::parse(r#"{"degree":2,"terms":[{"blades":[1],"coeff":"1"}]}"#).is_err());
        assert!(FormFile::parse(r#"{"degree":2,"terms":[{"blades":[2,1],"coeff":"1"}]}"#).is_err());
        assert!(FormFile::parse(r#"{"degree":1,"terms":[{"blades":[7],"coeff":"1"}]}"#).is_err());
        assert!(FormFile::parse("not json").is_err());
        let deg3 = FormFile::from_const(&standard_structures().rho0);
        assert!(Potential::from_file(&deg3).is_err());
    }

    #[test]
    fn grid_csv_round_trip() {
        let shape = GridShape::new(vec![0, 2], 4).unwrap();
        let t = TrigScalar::cos([1, 0, 1, 0, 0, 0], int(1));
        let form = GridForm::from_const_on(&standard_structures().rho0, &shape)
            .times_scalar(&t.sample(&shape));
        let mut buf = Vec::new();
        write_grid_csv(&form, &shape, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("axes,N,degree,blade-list\n1;3,4,3,"));
        let (s2, f2) = read_grid_csv(&buf[..]).unwrap();
        assert_eq!(s2, shape);
        assert!(f2.max_abs_diff(&form) == 0.0);
        assert!(read_grid_csv("axes,N\n".as_bytes()).is_err());
    }
}
