//! Built-in example systems, the unicycle feedback transformation, and the
//! JSON system-definition format.
//!
//! ```json
//! {"name": "heisenberg", "n": 3, "m": 2, "declared_order": 2,
//!  "fields": [[[{"coeff": 1.0, "exponents": [0,0,0]}], [], []],
//!             [[], [{"coeff": 1.0, "exponents": [0,0,0]}], [{"coeff": 1.0, "exponents": [1,0,0]}]]]}
//! ```
//!
//! `fields` may instead be `{"builtin": "<name>"}`. Optional keys: `drift`
//! (one polynomial field), `input_bounds`, `angular`, `leaf`.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Poly;
use crate::rational::{from_f64, to_f64, Q};
use crate::vfield::{
    Analytic, BuiltinField, ControlSystem, Domain, PolyField, VectorField, MAX_EXPONENT,
};

pub const BUILTIN_NAMES: [&str; 8] = [
    "heisenberg",
    "chained4",
    "unicycle",
    "unicycle_nilpotent",
    "scalar_saturated[:alpha]",
    "linear:{\"A\":[[..]],\"B\":[[..]]}",
    "constant_plane",
    "constant_line",
];

fn mono(n: usize, c: f64, e: &[u16]) -> Poly<Q> {
    Poly::monomial(n, e.to_vec(), from_f64(c))
}

fn poly_field(comps: Vec<Poly<Q>>) -> VectorField {
    VectorField::Polynomial(PolyField::new(comps).expect("well-formed builtin"))
}

pub fn heisenberg() -> ControlSystem {
    let n = 3;
    let x1 = poly_field(vec![mono(n, 1.0, &[0, 0, 0]), Poly::zero(n), Poly::zero(n)]);
    let x2 = poly_field(vec![Poly::zero(n), mono(n, 1.0, &[0, 0, 0]), mono(n, 1.0, &[1, 0, 0])]);
    ControlSystem::new("heisenberg", vec![x1, x2]).unwrap().with_order(2)
}

/// `X1 = (1, 0, x2, x3)`, `X2 = (0, 1, 0, 0)`: nilpotent of order 3 with
/// `[X1,X2] = (0,0,-1,0)` and `[X1,[X1,X2]] = (0,0,0,1)`.
pub fn chained4() -> ControlSystem {
    let n = 4;
    let x1 = poly_field(vec![
        mono(n, 1.0, &[0, 0, 0, 0]),
        Poly::zero(n),
        mono(n, 1.0, &[0, 1, 0, 0]),
        mono(n, 1.0, &[0, 0, 1, 0]),
    ]);
    let x2 =
        poly_field(vec![Poly::zero(n), mono(n, 1.0, &[0, 0, 0, 0]), Poly::zero(n), Poly::zero(n)]);
    ControlSystem::new("chained4", vec![x1, x2]).unwrap().with_order(3)
}

/// Kinematic unicycle on `(x, y, z)`, `z` the heading.
pub fn unicycle() -> ControlSystem {
    let x1 = VectorField::Builtin(BuiltinField {
        label: "unicycle.X1".into(),
        comps: vec![Analytic::Cos(2), Analytic::Sin(2), Analytic::Const(0.0)],
        domain: None,
    });
    let x2 = VectorField::Builtin(BuiltinField {
        label: "unicycle.X2".into(),
        comps: vec![Analytic::Const(0.0), Analytic::Const(0.0), Analytic::Const(1.0)],
        domain: None,
    });
    ControlSystem::new("unicycle", vec![x1, x2]).unwrap().with_angular(vec![2])
}

/// `Y1 = X1 / cos z = (1, tan z, 0)`, `Y2 = cos^2 z X2`, valid for `|z| < pi/2`.
pub fn unicycle_nilpotent() -> ControlSystem {
    let domain = Some(Domain { var: 2, bound: FRAC_PI_2 });
    let y1 = VectorField::Builtin(BuiltinField {
        label: "unicycle_nilpotent.Y1".into(),
        comps: vec![Analytic::Const(1.0), Analytic::Tan(2), Analytic::Const(0.0)],
        domain,
    });
    let y2 = VectorField::Builtin(BuiltinField {
        label: "unicycle_nilpotent.Y2".into(),
        comps: vec![Analytic::Const(0.0), Analytic::Const(0.0), Analytic::CosSq(2)],
        domain,
    });
    ControlSystem::new("unicycle_nilpotent", vec![y1, y2])
        .unwrap()
        .with_order(2)
        .with_angular(vec![2])
}

/// `x' = alpha x + u` with `|u| <= 1`; the drift makes it simulation-only.
pub fn scalar_saturated(alpha: f64) -> ControlSystem {
    let drift = poly_field(vec![mono(1, alpha, &[1])]);
    let name = if alpha == 1.0 { "scalar_saturated".to_string() } else { format!("scalar_saturated:{alpha}") };
    ControlSystem::new(&name, vec![VectorField::constant(&[1.0])])
        .unwrap()
        .with_drift(drift)
        .unwrap()
        .with_input_bounds(-1.0, 1.0)
}

/// `x' = A x + B u`; control fields are the columns of `B`.
pub fn linear(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<ControlSystem> {
    let n = a.len();
    if n == 0 || a.iter().any(|r| r.len() != n) {
        return Err(Error::Schema("A must be a non-empty square matrix".into()));
    }
    if b.len() != n || b[0].is_empty() || b.iter().any(|r| r.len() != b[0].len()) {
        return Err(Error::Schema(format!("B must have {n} rows of equal length")));
    }
    if a.iter().chain(b).flatten().any(|x| !x.is_finite()) {
        return Err(Error::Schema("matrix entries must be finite".into()));
    }
    let m = b[0].len();
    let fields = (0..m).map(|j| VectorField::constant(&b.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
    let drift = poly_field(
        a.iter()
            .map(|row| {
                let mut p = Poly::zero(n);
                for (j, &c) in row.iter().enumerate() {
                    let mut e = vec![0; n];
                    e[j] = 1;
                    p.add_term(e, from_f64(c));
                }
                p
            })
            .collect(),
    );
    let spec = serde_json::json!({ "A": a, "B": b });
    ControlSystem::new(&format!("linear:{spec}"), fields)?.with_drift(drift)
}

/// Involutive pair spanning the planes `z = const`.
pub fn constant_plane() -> ControlSystem {
    ControlSystem::new(
        "constant_plane",
        vec![VectorField::constant(&[1.0, 0.0, 0.0]), VectorField::constant(&[0.0, 1.0, 0.0])],
    )
    .unwrap()
    .with_leaf(vec![2])
}

/// Single field whose leaves are the lines parallel to the first axis.
pub fn constant_line() -> ControlSystem {
    ControlSystem::new("constant_line", vec![VectorField::constant(&[1.0, 0.0, 0.0])])
        .unwrap()
        .with_leaf(vec![1, 2])
}

#[derive(Deserialize)]
struct LinearSpec {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
}

/// Looks up a builtin by name; `scalar_saturated:<alpha>` and
/// `linear:<json>` take parameters.
pub fn builtin(name: &str) -> Result<ControlSystem> {
    match name {
        "heisenberg" => Ok(heisenberg()),
        "chained4" => Ok(chained4()),
        "unicycle" => Ok(unicycle()),
        "unicycle_nilpotent" => Ok(unicycle_nilpotent()),
        "scalar_saturated" => Ok(scalar_saturated(1.0)),
        "constant_plane" => Ok(constant_plane()),
        "constant_line" => Ok(constant_line()),
        _ => {
            if let Some(alpha) = name.strip_prefix("scalar_saturated:") {
                let alpha: f64 = alpha
                    .parse()
                    .map_err(|_| Error::UnknownSystem(format!("{name} (alpha must be a number)")))?;
                if !alpha.is_finite() {
                    return Err(Error::UnknownSystem(format!("{name} (alpha must be finite)")));
                }
                return Ok(scalar_saturated(alpha));
            }
            if let Some(spec) = name.strip_prefix("linear:") {
                let spec: LinearSpec = serde_json::from_str(spec)
                    .map_err(|e| Error::Schema(format!("linear system parameters: {e}")))?;
                return linear(&spec.a, &spec.b);
            }
            Err(Error::UnknownSystem(name.to_string()))
        }
    }
}

// ---------------------------------------------------------------------------

pub type InputMap = Arc<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// State-dependent input reparametrization `u = forward(x, v)`.
#[derive(Clone)]
pub struct FeedbackTransform {
    pub name: String,
    pub forward: InputMap,
    pub inverse: InputMap,
    pub domain: Option<Domain>,
}

impl std::fmt::Debug for FeedbackTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FeedbackTransform").field("name", &self.name).field("domain", &self.domain).finish()
    }
}

impl FeedbackTransform {
    fn check(&self, x: &[f64]) -> Result<()> {
        match self.domain {
            Some(d) if !d.contains(x) => Err(Error::Domain { what: self.name.clone(), state: x.to_vec() }),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok((self.forward)(x, v))
    }

    pub fn invert(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        Ok((self.inverse)(x, u))
    }
}

/// `u1 = v1 / cos z`, `u2 = cos^2 z v2`: turns the unicycle into
/// [`unicycle_nilpotent`].
pub fn unicycle_feedback() -> FeedbackTransform {
    FeedbackTransform {
        name: "unicycle_feedback".into(),
        forward: Arc::new(|x, v| {
            let c = x[2].cos();
            vec![v[0] / c, c * c * v[1]]
        }),
        inverse: Arc::new(|x, u| {
            let c = x[2].cos();
            vec![u[0] * c, u[1] / (c * c)]
        }),
        domain: Some(Domain { var: 2, bound: FRAC_PI_2 }),
    }
}

// ---------------------------------------------------------------------------
// System files

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonomialSpec {
    pub coeff: f64,
    pub exponents: Vec<u16>,
}

type FieldSpec = Vec<Vec<MonomialSpec>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FieldsSpec {
    Builtin { builtin: String },
    Polynomial(Vec<FieldSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub fields: FieldsSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<FieldSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_bounds: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub angular: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf: Option<Vec<usize>>,
}

fn field_from_spec(spec: &FieldSpec, n: usize, what: &str) -> Result<VectorField> {
    if spec.len() != n {
        return Err(Error::Schema(format!("{what}: expected {n} components, found {}", spec.len())));
    }
    let mut comps = Vec::with_capacity(n);
    for (c, monos) in spec.iter().enumerate() {
        let mut p = Poly::zero(n);
        for (t, mo) in monos.iter().enumerate() {
            let at = format!("{what}, component {}, monomial {}", c + 1, t + 1);
            if mo.exponents.len() != n {
                return Err(Error::Schema(format!(
                    "{at}: exponent vector has length {}, expected {n}",
                    mo.exponents.len()
                )));
            }
            if let Some(&e) = mo.exponents.iter().find(|&&e| e > MAX_EXPONENT) {
                return Err(Error::Schema(format!("{at}: exponent {e} exceeds cap {MAX_EXPONENT}")));
            }
            if !mo.coeff.is_finite() {
                return Err(Error::Schema(format!("{at}: coefficient must be finite")));
            }
            p.add_term(mo.exponents.clone(), from_f64(mo.coeff));
        }
        comps.push(p);
    }
    Ok(VectorField::Polynomial(PolyField::new(comps)?))
}

fn field_to_spec(f: &VectorField) -> Option<FieldSpec> {
    let p = f.as_polynomial()?;
    Some(
        p.comps()
            .iter()
            .map(|c| {
                c.terms()
                    .map(|(e, v)| MonomialSpec { coeff: to_f64(v), exponents: e.clone() })
                    .collect()
            })
            .collect(),
    )
}

pub fn system_from_file(file: &SystemFile) -> Result<ControlSystem> {
    let mut sys = match &file.fields {
        FieldsSpec::Builtin { builtin: name } => {
            let mut sys = builtin(name)?;
            if sys.n() != file.n || sys.m() != file.m {
                return Err(Error::Schema(format!(
                    "builtin '{name}' has n={}, m={}, file declares n={}, m={}",
                    sys.n(),
                    sys.m(),
                    file.n,
                    file.m
                )));
            }
            sys.name = file.name.clone();
            sys
        }
        FieldsSpec::Polynomial(specs) => {
            if file.n == 0 || file.m == 0 {
                return Err(Error::Schema("n and m must be >= 1".into()));
            }
            if specs.len() != file.m {
                return Err(Error::Schema(format!("expected {} fields, found {}", file.m, specs.len())));
            }
            let fields = specs
                .iter()
                .enumerate()
                .map(|(i, s)| field_from_spec(s, file.n, &format!("field {}", i + 1)))
                .collect::<Result<Vec<_>>>()?;
            ControlSystem::new(&file.name, fields)?
        }
    };
    if let Some(k) = file.declared_order {
        if k == 0 {
            return Err(Error::Schema("declared_order must be >= 1".into()));
        }
        sys.declared_order = Some(k);
    }
    if let Some(d) = &file.drift {
        sys = sys.with_drift(field_from_spec(d, file.n, "drift")?)?;
    }
    if let Some((lo, hi)) = file.input_bounds {
        if !(lo <= hi) {
            return Err(Error::Schema("input_bounds must satisfy lo <= hi".into()));
        }
        sys.input_bounds = Some((lo, hi));
    }
    for &i in file.angular.iter().chain(file.leaf.iter().flatten()) {
        if i >= file.n {
            return Err(Error::Schema(format!("coordinate index {i} out of range for n={}", file.n)));
        }
    }
    if !file.angular.is_empty() {
        sys.angular = file.angular.clone();
    }
    if file.leaf.is_some() {
        sys.leaf = file.leaf.clone();
    }
    Ok(sys)
}

pub fn system_to_file(sys: &ControlSystem) -> Result<SystemFile> {
    let poly: Option<Vec<FieldSpec>> = sys.fields().iter().map(field_to_spec).collect();
    let drift = match sys.drift() {
        None => None,
        Some(d) => Some(field_to_spec(d).ok_or_else(|| {
            Error::Usage("only polynomial drifts can be saved".into())
        })?),
    };
    let fields = match poly {
        Some(p) => FieldsSpec::Polynomial(p),
        None => {
            builtin(&sys.name).map_err(|_| {
                Error::Usage(format!("system '{}' has non-polynomial fields and is not a builtin", sys.name))
            })?;
            FieldsSpec::Builtin { builtin: sys.name.clone() }
        }
    };
    Ok(SystemFile {
        name: sys.name.clone(),
        n: sys.n(),
        m: sys.m(),
        fields,
        declared_order: sys.declared_order,
        drift,
        input_bounds: sys.input_bounds,
        angular: sys.angular.clone(),
        leaf: sys.leaf.clone(),
    })
}

pub fn parse_system(json: &str) -> Result<ControlSystem> {
    let file: SystemFile = serde_json::from_str(json)
        .map_err(|e| Error::Schema(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    system_from_file(&file)
}

pub fn load_system(path: impl AsRef<Path>) -> Result<ControlSystem> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_system(&text)
}

pub fn save_system(sys: &ControlSystem, path: impl AsRef<Path>) -> Result<()> {
    let file = system_to_file(sys)?;
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Schema(e.to_string()))?;
    std::fs::write(path.as_ref(), text + "\n")
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_shapes() {
        let h = builtin("heisenberg").unwrap();
        assert_eq!((h.n(), h.m(), h.declared_order), (3, 2, Some(2)));
        assert_eq!(h.field(1).evaluate(&[2.0, 0.0, 0.0]).unwrap(), vec![0.0, 1.0, 2.0]);
        let u = builtin("unicycle").unwrap();
        assert_eq!(u.field(0).evaluate(&[0.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(builtin("scalar_saturated:2").unwrap().input_bounds, Some((-1.0, 1.0)));
        let lin = builtin(r#"linear:{"A":[[0,1],[0,0]],"B":[[0],[1]]}"#).unwrap();
        assert_eq!((lin.n(), lin.m()), (2, 1));
        assert_eq!(lin.velocity(&[1.0, 2.0], &[3.0]).unwrap(), vec![2.0, 3.0]);
        assert!(matches!(builtin("nope"), Err(Error::UnknownSystem(_))));
    }

    #[test]
    fn feedback_at_sixty_degrees() {
        let fb = unicycle_feedback();
        let u = fb.apply(&[0.0, 0.0, std::f64::consts::FRAC_PI_3], &[1.0, 0.0]).unwrap();
        assert!((u[0] - 2.0).abs() < 1e-12 && u[1] == 0.0);
        assert_eq!(fb.apply(&[0.0, 0.0, 0.0], &[0.3, -0.7]).unwrap(), vec![0.3, -0.7]);
        assert!(fb.apply(&[0.0, 0.0, 2.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn schema_errors_name_the_component() {
        let bad = r#"{"name":"x","n":2,"m":1,"fields":[[[{"coeff":1.0,"exponents":[0]}],[]]]}"#;
        let err = parse_system(bad).unwrap_err();
        assert!(matches!(&err, Error::Schema(msg) if msg.contains("component 1")), "{err}");
        let big = r#"{"name":"x","n":1,"m":1,"fields":[[[{"coeff":1.0,"exponents":[17]}]]]}"#;
        assert!(matches!(parse_system(big), Err(Error::Schema(_))));
        assert!(matches!(parse_system("{"), Err(Error::Schema(_))));
    }

    #[test]
    fn builtin_reference_in_file() {
        let s = parse_system(r#"{"name":"car","n":3,"m":2,"fields":{"builtin":"unicycle"}}"#).unwrap();
        assert_eq!(s.name, "car");
        assert_eq!(s.angular, vec![2]);
        let wrong = r#"{"name":"car","n":4,"m":2,"fields":{"builtin":"unicycle"}}"#;
        assert!(matches!(parse_system(wrong), Err(Error::Schema(_))));
    }
}
