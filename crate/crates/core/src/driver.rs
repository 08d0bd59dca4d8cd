//! One-call drivers from a parsed scene to a finished report.
//!
//! Both front ends — the `jetgeo` binary and the C bindings — funnel
//! through this module so they expose exactly the same behavior: the same
//! structure reports, the same verification suites, and the same seeded
//! sampling controls. The front ends keep only their own concerns
//! (argument parsing, I/O, exit codes, handle management).

use thiserror::Error;

use crate::config::{ConfigError, SceneConfig, SceneKind};
use crate::curvtor::{curvature, torsion};
use crate::geometry::{
    berwald_connection, canonical_nlc, christoffel_spatial, christoffel_time, GammaConnection,
    GeometryError, NonlinearConnection,
};
use crate::identities::{
    bracket_check_with_tester, deflection_identities_check_with_tester,
    deflection_tensors_with_tester, em_two_form, generic_dvector, ricci_check_with_tester,
    IdentityError, IdentityReport,
};
use crate::report::{
    add_christoffel, add_connection, add_curvature, add_deflection, add_em, add_nlc, add_torsion,
    merge_verdicts, scene_header, Report,
};
use crate::symexpr::ZeroTester;
use crate::transform::{
    covariance_check_with_tol, metric_covariance_check, standard_changes, transform_connection,
    transform_nlc, CoordChange, CovarianceObject, TransformError,
};

/// Scalar probe functions fed to the frame-bracket checks per run.
pub const BRACKET_PROBES: usize = 10;

#[derive(Debug, Error)]
pub enum DriverError {
    /// The request does not fit the scene: e.g. Christoffel symbols of a
    /// scene that gives connection coefficients instead of a metric pair.
    #[error("{0}")]
    Unsupported(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Identity(#[from] IdentityError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

/// Structure a [`compute_report`] call produces.
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum ComputeKind {
    Christoffel,
    Nlc,
    Connection,
    Torsion,
    Curvature,
    Deflection,
    Em,
}

/// Identity family a [`verify_report`] call checks.
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum VerifyKind {
    Ricci,
    Deflection,
    Brackets,
    Covariance,
    All,
}

/// What a [`transform_report`] call transports across the change.
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum TransformKind {
    Nlc,
    Connection,
    Check,
}

/// Which linear connection to read off the scene.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Default)]
pub enum ConnectionChoice {
    /// Whatever the scene provides: the metric-pair connection for a
    /// metric scene, the explicit coefficients otherwise.
    #[default]
    Auto,
    /// The connection derived from the metric pair; errors on a scene
    /// that gives explicit coefficients.
    Berwald,
    /// The explicit coefficients from the scene file; errors on a metric
    /// scene.
    Explicit,
}

/// Sampling controls for every seeded check a driver call runs.
#[derive(Debug, Copy, Clone)]
pub struct Controls {
    /// Sample points per check.
    pub samples: usize,
    /// Seed for all sampling.
    pub seed: u64,
    /// Largest residual accepted as zero.
    pub tol: f64,
}

impl Default for Controls {
    fn default() -> Self {
        Controls {
            samples: ZeroTester::DEFAULT_TRIALS,
            seed: 0,
            tol: ZeroTester::DEFAULT_TOL,
        }
    }
}

impl Controls {
    /// Resolves per-run overrides against the scene file and the
    /// defaults: an explicit value wins, then the scene-file value, then
    /// (for the seed only) `fallback_seed`, then the default.
    pub fn resolve(
        config: &SceneConfig,
        samples: Option<usize>,
        seed: Option<u64>,
        tol: Option<f64>,
        fallback_seed: Option<u64>,
    ) -> Controls {
        let defaults = Controls::default();
        Controls {
            samples: samples.or(config.samples).unwrap_or(defaults.samples),
            seed: seed
                .or(config.seed)
                .or(fallback_seed)
                .unwrap_or(defaults.seed),
            tol: tol.or(config.tol).unwrap_or(defaults.tol),
        }
    }
}

/// Tester carrying the full controls; used for identity verdicts.
pub fn tester_for(config: &SceneConfig, controls: Controls) -> ZeroTester {
    ZeroTester::new(config.domain())
        .with_trials(controls.samples)
        .with_seed(controls.seed)
        .with_tol(controls.tol)
}

/// Tester for input validation (coordinate-change round-trips and other
/// well-formedness checks). Honors the sampling controls but always keeps
/// the default tolerance: the tolerance control expresses how strict the
/// identity verdicts are, not what counts as a valid scene.
pub fn validation_tester(config: &SceneConfig, controls: Controls) -> ZeroTester {
    ZeroTester::new(config.domain())
        .with_trials(controls.samples)
        .with_seed(controls.seed)
}

/// The linear connection the scene provides through the chosen source.
pub fn scene_connection(
    config: &SceneConfig,
    choice: ConnectionChoice,
) -> Result<GammaConnection, DriverError> {
    match (&config.kind, choice) {
        (
            SceneKind::Metrics { time, spatial },
            ConnectionChoice::Auto | ConnectionChoice::Berwald,
        ) => Ok(berwald_connection(time, spatial)?),
        (SceneKind::Metrics { .. }, ConnectionChoice::Explicit) => Err(DriverError::Unsupported(
            "the scene defines a metric pair, not explicit connection coefficients".into(),
        )),
        (
            SceneKind::Explicit { connection },
            ConnectionChoice::Auto | ConnectionChoice::Explicit,
        ) => Ok(connection.clone()),
        (SceneKind::Explicit { .. }, ConnectionChoice::Berwald) => Err(DriverError::Unsupported(
            "the scene gives explicit connection coefficients, not a metric pair".into(),
        )),
    }
}

/// The scene's nonlinear connection: canonical for a metric pair, the
/// given `M`/`N` entries otherwise.
pub fn scene_nlc(config: &SceneConfig) -> Result<NonlinearConnection, DriverError> {
    match &config.kind {
        SceneKind::Metrics { time, spatial } => Ok(canonical_nlc(time, spatial)?),
        SceneKind::Explicit { connection } => Ok(connection.nlc.clone()),
    }
}

/// Computes one structure of the scene and lays it out as a report.
pub fn compute_report(
    config: &SceneConfig,
    kind: ComputeKind,
    choice: ConnectionChoice,
    controls: Controls,
) -> Result<Report, DriverError> {
    let mut report = Report::new();
    match kind {
        ComputeKind::Christoffel => {
            let SceneKind::Metrics { time, spatial } = &config.kind else {
                return Err(DriverError::Unsupported(
                    "christoffel symbols require a metric pair (`h11`, `phi`)".into(),
                ));
            };
            add_christoffel(
                &mut report,
                &christoffel_time(time),
                &christoffel_spatial(spatial),
            );
        }
        ComputeKind::Nlc => {
            let nlc = scene_nlc(config)?;
            report.push_header(scene_header(&config.space, &config.params));
            add_nlc(&mut report, &nlc);
        }
        ComputeKind::Connection => {
            let conn = scene_connection(config, choice)?;
            report.push_header(scene_header(&config.space, &config.params));
            add_connection(&mut report, &conn);
        }
        ComputeKind::Torsion => {
            let conn = scene_connection(config, choice)?;
            add_torsion(&mut report, &torsion(&conn));
        }
        ComputeKind::Curvature => {
            let conn = scene_connection(config, choice)?;
            add_curvature(&mut report, &curvature(&conn));
        }
        ComputeKind::Deflection => {
            let conn = scene_connection(config, choice)?;
            let set = deflection_tensors_with_tester(&conn, &tester_for(config, controls))?;
            add_deflection(&mut report, &set);
        }
        ComputeKind::Em => {
            let Some(dlow) = &config.dlow else {
                return Err(DriverError::Unsupported(
                    "the electromagnetic 2-form requires `Dlow[i][j]` entries in the scene file"
                        .into(),
                ));
            };
            add_em(&mut report, &em_two_form(dlow));
        }
    }
    Ok(report)
}

/// Verifies the chosen identity family of the scene's connection by
/// seeded sampling and lays the verdicts out as a report. The report
/// answers [`Report::has_failures`] for the overall outcome.
pub fn verify_report(
    config: &SceneConfig,
    kind: VerifyKind,
    controls: Controls,
) -> Result<Report, DriverError> {
    let conn = scene_connection(config, ConnectionChoice::Auto)?;
    let tester = tester_for(config, controls);
    let mut parts: Vec<IdentityReport> = Vec::new();

    if matches!(kind, VerifyKind::Ricci | VerifyKind::All) {
        let x = generic_dvector(&config.space, controls.seed)?;
        parts.push(ricci_check_with_tester(&conn, &x, &tester)?);
    }
    if matches!(kind, VerifyKind::Deflection | VerifyKind::All) {
        parts.push(deflection_identities_check_with_tester(&conn, &tester)?);
    }
    if matches!(kind, VerifyKind::Brackets | VerifyKind::All) {
        parts.push(bracket_check_with_tester(
            &conn.nlc,
            BRACKET_PROBES,
            &tester,
        )?);
    }
    if matches!(kind, VerifyKind::Covariance | VerifyKind::All) {
        let input_tester = validation_tester(config, controls);
        let mut changes = standard_changes(&config.space, &input_tester)?;
        if let Some(spec) = &config.change {
            changes.push(("config".into(), spec.realize(&config.space, &input_tester)?));
        }
        for (name, ch) in &changes {
            parts.extend(covariance_suite(config, &conn, name, ch, controls)?);
        }
    }

    let mut report = Report::new();
    report.push_verdicts(merge_verdicts(parts));
    Ok(report)
}

/// All transport-rule checks for one coordinate change, with the change
/// name spliced into each entry name.
fn covariance_suite(
    config: &SceneConfig,
    conn: &GammaConnection,
    change_name: &str,
    ch: &CoordChange,
    controls: Controls,
) -> Result<Vec<IdentityReport>, DriverError> {
    let Controls { samples, seed, tol } = controls;
    let mut parts: Vec<IdentityReport> = Vec::new();

    if let SceneKind::Metrics { time, spatial } = &config.kind {
        parts.push(metric_covariance_check(
            time, spatial, ch, samples, seed, tol,
        )?);
    }
    for object in [
        CovarianceObject::Torsion,
        CovarianceObject::Curvature,
        CovarianceObject::Deflection,
    ] {
        parts.push(covariance_check_with_tol(
            &object, conn, ch, samples, seed, tol,
        )?);
    }

    for part in &mut parts {
        for entry in &mut part.entries {
            let rest = entry
                .name
                .strip_prefix("covariance.")
                .unwrap_or(&entry.name)
                .to_string();
            entry.name = format!("covariance.{change_name}.{rest}");
        }
    }
    Ok(parts)
}

/// Transports a structure across the coordinate change, or — for
/// [`TransformKind::Check`] — verifies the transport rules themselves.
pub fn transform_report(
    config: &SceneConfig,
    ch: &CoordChange,
    kind: TransformKind,
    controls: Controls,
) -> Result<Report, DriverError> {
    let mut report = Report::new();
    match kind {
        TransformKind::Nlc => {
            let nlc = transform_nlc(&scene_nlc(config)?, ch)?;
            report.push_header(scene_header(&config.space, &config.params));
            add_nlc(&mut report, &nlc);
        }
        TransformKind::Connection => {
            let conn =
                transform_connection(&scene_connection(config, ConnectionChoice::Auto)?, ch)?;
            report.push_header(scene_header(&config.space, &config.params));
            add_connection(&mut report, &conn);
        }
        TransformKind::Check => {
            let conn = scene_connection(config, ConnectionChoice::Auto)?;
            let parts = covariance_suite(config, &conn, "change", ch, controls)?;
            report.push_verdicts(merge_verdicts(parts));
        }
    }
    Ok(report)
}
