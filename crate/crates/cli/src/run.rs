//! Command dispatch: builds the manifold and mesh, runs the requested
//! checks and collects them into a [`Report`].

use std::sync::Arc;

use curvatura::ambient::AmbientKind;
use curvatura::frames::{point_geometry, FrameGauge};
use curvatura::immersion::{build_mesh, evaluate_nodes, integrate, AmbientFourierField, BoundaryBump, Deformation, DeformationField};
use curvatura::invariants::{invariant_sample, space_form_combination, InvariantSample};
use curvatura::tubes::{austerity_check, focal_radius, tube_report, tubular_minimality_report, TubularOptions};
use curvatura::variational::{
    cpn_checks, cpn_residual_report, el_operator_at, el_spaceform_at, first_variation_checks, ElOptions, VariationOptions,
    DEFAULT_STENCIL_STEP, DEFAULT_T_STEP,
};
use curvatura::{GeometryError, SubmanifoldMesh};

use crate::config::{Command, RunConfig};
use crate::report::{Report, Section, Settings, Table, Verdict};
use crate::zoo::{self, ZooManifold};
use crate::CliError;

/// Amplitude of the seeded ambient deformation fields.
pub const FIELD_AMPLITUDE: f64 = 0.3;
/// Fourier modes per axis of the deformation fields.
const FIELD_MODES: usize = 3;
/// Tube radii as fractions of the tube window.
const RADIUS_FRACTIONS: [f64; 3] = [0.1, 0.2, 0.3];

struct Context<'a> {
    cfg: &'a RunConfig,
    zoo: ZooManifold,
    mesh: SubmanifoldMesh,
    ps: Vec<usize>,
}

impl Context<'_> {
    fn n(&self) -> usize {
        self.zoo.patch.dim()
    }

    fn space_form_c(&self) -> Option<f64> {
        match self.zoo.patch.ambient().kind() {
            AmbientKind::Euclidean => Some(0.0),
            AmbientKind::SpaceForm { c } => Some(c),
            AmbientKind::FubiniStudy { .. } => None,
        }
    }

    fn reference(&self, quantity: &str) -> Option<f64> {
        self.zoo.references.iter().find(|r| r.quantity == quantity).map(|r| r.value)
    }

    fn u_columns(&self) -> Vec<String> {
        let mut cols: Vec<String> = (0..self.n()).map(|a| format!("u{a}")).collect();
        cols.push("dv".into());
        cols
    }
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |a, b| a.max(b.abs()))
}

/// Runs `cfg` on the current rayon pool.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let zoo = zoo::build(&cfg.manifold).map_err(|e| match e {
        GeometryError::Descriptor(msg) => CliError::Usage(msg),
        other => CliError::Geometry(other),
    })?;
    let n = zoo.patch.dim();
    let ps = match &cfg.p {
        Some(ps) => {
            if let Some(bad) = ps.iter().find(|p| 2 * **p > n) {
                return Err(CliError::Usage(format!("p = {bad} outside 0..={} for n = {n}", n / 2)));
            }
            ps.clone()
        }
        None => (0..=n / 2).collect(),
    };
    let resolution = cfg.resolution.clone().unwrap_or_else(|| zoo.default_resolution.clone());
    let mesh = build_mesh(&zoo.patch, &resolution).map_err(|e| match e {
        GeometryError::Precondition(msg) => CliError::Usage(msg),
        other => CliError::Geometry(other),
    })?;
    let ctx = Context { cfg, zoo, mesh, ps };

    let mut sections = Vec::new();
    let all = cfg.command == Command::ReportAll;
    if all || cfg.command == Command::Invariants {
        sections.push(invariants_section(&ctx)?);
    }
    if all || cfg.command == Command::ElCheck {
        sections.extend(el_sections(&ctx)?);
    }
    if all || cfg.command == Command::FirstVariation {
        sections.push(first_variation_section(&ctx)?);
    }
    if cfg.command == Command::Tube || (all && ctx.space_form_c().is_some()) {
        sections.push(tube_section(&ctx)?);
    }
    if all || cfg.command == Command::Austere {
        sections.extend(austere_sections(&ctx)?);
    }

    let passed = sections.iter().all(Section::passed);
    Ok(Report {
        command: cfg.command.name().into(),
        manifold: ctx.zoo.name.clone(),
        params: ctx.zoo.params.clone(),
        ambient: ctx.zoo.patch.ambient().label(),
        n,
        m: ctx.zoo.patch.codim(),
        resolution: ctx.mesh.resolution.clone(),
        seed: cfg.seed,
        p: ctx.ps.clone(),
        settings: Settings {
            tolerances: cfg.tolerances.clone(),
            ambient_fd_step: ctx.zoo.patch.ambient().fd_step(),
            stencil_step: DEFAULT_STENCIL_STEP,
            deformation_step: DEFAULT_T_STEP * ctx.zoo.patch.scale(),
            field_amplitude: FIELD_AMPLITUDE,
            variations: cfg.variations,
            xi_samples: cfg.xi_samples,
        },
        sections,
        passed,
    })
}

fn invariants_section(ctx: &Context) -> Result<Section, CliError> {
    let patch = &ctx.zoo.patch;
    let tol = &ctx.cfg.tolerances;
    let samples = evaluate_nodes(&ctx.mesh, |node| invariant_sample(&point_geometry(patch, &node.u, &FrameGauge::default())?))?;
    let mut s = Section::new("invariants");
    let mut cols = ctx.u_columns();
    for &p in &ctx.ps {
        cols.extend([format!("K_{}", 2 * p), format!("KM_{}", 2 * p), format!("H_{}", 2 * p + 1), format!("HM_{}", 2 * p + 1)]);
    }
    let mut table = Table::new(cols);
    for (node, inv) in ctx.mesh.nodes.iter().zip(&samples) {
        let mut row = node.u.clone();
        row.push(node.dv);
        for &p in &ctx.ps {
            row.extend([inv.k[p], inv.k_intrinsic[p], inv.h_norm(p), inv.h_intrinsic_norm(p)]);
        }
        table.push(row);
    }
    s.table = table;

    let volume = ctx.mesh.volume();
    s.totals.insert("volume".into(), volume);
    let column = |f: &dyn Fn(&InvariantSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    for &p in &ctx.ps {
        let k = column(&|i| i.k[p]);
        let km = column(&|i| i.k_intrinsic[p]);
        s.totals.insert(format!("M_{}", 2 * p), integrate(&ctx.mesh, &k)?);
        s.totals.insert(format!("MM_{}", 2 * p), integrate(&ctx.mesh, &km)?);
        s.totals.insert(format!("K_{}_min", 2 * p), k.iter().copied().fold(f64::INFINITY, f64::min));
        s.totals.insert(format!("K_{}_max", 2 * p), k.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        s.totals.insert(format!("KM_{}_min", 2 * p), km.iter().copied().fold(f64::INFINITY, f64::min));
        s.totals.insert(format!("KM_{}_max", 2 * p), km.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        s.totals.insert(format!("H_{}_max", 2 * p + 1), max_abs(column(&|i| i.h_norm(p))));
    }

    // closed-form references
    let rel_gap = |x: f64, r: f64| (x - r).abs() / r.abs().max(1.0);
    if let Some(r) = ctx.reference("volume") {
        s.verdicts.push(Verdict::below("volume vs reference", rel_gap(volume, r), tol.reference));
    }
    if let (Some(r), true) = (ctx.reference("M_2"), ctx.n() >= 2) {
        let m2 = integrate(&ctx.mesh, &column(&|i| i.k[1]))?;
        s.verdicts.push(Verdict::below("M_2 vs reference", rel_gap(m2, r), tol.reference));
    }
    type Pick = fn(&InvariantSample) -> f64;
    let picks: [(&str, Pick); 4] = [
        ("K_2", |i| i.k[1]),
        ("K^M_2", |i| i.k_intrinsic[1]),
        ("|H_1|", |i| i.h_norm(0)),
        ("|H_3|", |i| i.h_norm(1)),
    ];
    for (q, f) in picks {
        let needs = if q == "|H_1|" { 1 } else { 2 };
        if let (Some(r), true) = (ctx.reference(q), ctx.n() >= needs) {
            let gap = samples.iter().map(|i| rel_gap(f(i), r)).fold(0.0, f64::max);
            s.verdicts.push(Verdict::below(format!("{q} vs reference (max over nodes)"), gap, tol.reference));
        }
    }

    // intrinsic versus relative invariants in space forms
    if let Some(c) = ctx.space_form_c() {
        for &p in &ctx.ps {
            let mut k_gap: f64 = 0.0;
            let mut h_gap: f64 = 0.0;
            for inv in &samples {
                k_gap = k_gap.max((inv.k_intrinsic[p] - space_form_combination(&inv.k, c, p)).abs());
                for a in 0..inv.h[p].len() {
                    let rel: Vec<f64> = inv.h.iter().map(|h| h[a]).collect();
                    h_gap = h_gap.max((inv.h_intrinsic[p][a] - space_form_combination(&rel, c, p)).abs());
                }
            }
            s.verdicts.push(Verdict::below(format!("K^M_{} relation", 2 * p), k_gap, tol.relation));
            if 2 * p < ctx.n() {
                s.verdicts.push(Verdict::below(format!("H^M_{} relation", 2 * p + 1), h_gap, tol.relation));
            }
        }
    }
    Ok(s)
}

fn el_sections(ctx: &Context) -> Result<Vec<Section>, CliError> {
    let patch = &ctx.zoo.patch;
    let tol = &ctx.cfg.tolerances;
    let n = ctx.n();
    let m = patch.codim();
    let kind = patch.ambient().kind();
    let space_form = ctx.space_form_c().is_some();
    let opts = ElOptions::default();
    // per node: (|L_2p|, gap to the space-form shortcut) for each requested p
    let rows = evaluate_nodes(&ctx.mesh, |node| {
        ctx.ps
            .iter()
            .map(|&p| {
                let el = el_operator_at(patch, &node.u, p, &opts)?;
                let gap = if space_form {
                    let g = point_geometry(patch, &node.u, &opts.gauge)?;
                    let coeffs = g.frame.coefficients(&g.metric, &el.l);
                    let short = el_spaceform_at(kind, &g.relcurv, &g.sff, p)?;
                    let mut diff = coeffs.clone();
                    for a in 0..m {
                        diff[n + a] -= short[a];
                    }
                    diff.norm()
                } else {
                    f64::NAN
                };
                Ok((el.l_norm, gap))
            })
            .collect::<curvatura::Result<Vec<_>>>()
    })?;
    let mut s = Section::new("el-check");
    let mut cols = ctx.u_columns();
    for &p in &ctx.ps {
        cols.push(format!("L_{}", 2 * p));
        if space_form {
            cols.push(format!("L_{}_shortcut_gap", 2 * p));
        }
    }
    let mut table = Table::new(cols);
    for (node, row) in ctx.mesh.nodes.iter().zip(&rows) {
        let mut r = node.u.clone();
        r.push(node.dv);
        for (l, gap) in row {
            r.push(*l);
            if space_form {
                r.push(*gap);
            }
        }
        table.push(r);
    }
    s.table = table;
    for (k, &p) in ctx.ps.iter().enumerate() {
        let l_max = max_abs(rows.iter().map(|r| r[k].0));
        s.totals.insert(format!("L_{}_max", 2 * p), l_max);
        if space_form {
            let gap = max_abs(rows.iter().map(|r| r[k].1));
            s.totals.insert(format!("L_{}_shortcut_gap_max", 2 * p), gap);
            s.verdicts.push(Verdict::below(format!("L_{} general path vs shortcut", 2 * p), gap, tol.el_consistency));
        }
        if patch.is_complex() && !space_form {
            s.verdicts.push(Verdict::below(format!("|L_{}| on complex submanifold", 2 * p), l_max, tol.el_complex));
        }
    }
    if !space_form && !patch.is_complex() {
        s.notes.push("non-complex patch in a complex projective ambient: |L_2p| reported without a verdict".into());
    }
    let mut out = vec![s];

    if !space_form {
        let complex = patch.is_complex();
        let rep = if complex {
            cpn_checks(patch, &ctx.mesh, tol.el_complex, ctx.cfg.seed, &opts)?
        } else {
            cpn_residual_report(patch, &ctx.mesh, tol.el_complex, ctx.cfg.seed, &opts)?
        };
        let mut c = Section::new("complex-identities");
        let mut cols = ctx.u_columns();
        cols.extend(["curvature", "sff_pairing", "relcurv_j", "h_norm", "l_norm", "w_identity", "j_defect"].map(String::from));
        let mut table = Table::new(cols);
        for (node, r) in ctx.mesh.nodes.iter().zip(&rep.points) {
            let mut row = node.u.clone();
            row.push(node.dv);
            row.extend([r.curvature, r.sff_pairing, r.relcurv_j, r.h_norm, r.l_norm, r.w_identity, r.j_defect]);
            table.push(row);
        }
        c.table = table;
        let mx = &rep.max;
        for (name, v) in [
            ("curvature identities", mx.curvature),
            ("second fundamental form pairing", mx.sff_pairing),
            ("relative curvature J-invariance", mx.relcurv_j),
            ("|H_2p+1|", mx.h_norm),
            ("|L_2p|", mx.l_norm),
            ("W identity", mx.w_identity),
        ] {
            c.totals.insert(name.into(), v);
            if complex {
                c.verdicts.push(Verdict::below(name, v, tol.el_complex));
            }
        }
        c.totals.insert("J normal defect".into(), mx.j_defect);
        if !complex {
            c.notes.push("patch is not complex: residuals reported without verdicts".into());
        }
        out.push(c);
    }
    Ok(out)
}

fn deformations(ctx: &Context) -> Vec<Deformation> {
    let patch = &ctx.zoo.patch;
    (0..ctx.cfg.variations)
        .map(|i| {
            let seed = ctx.cfg.seed.wrapping_mul(1000).wrapping_add(i as u64);
            let base: Arc<dyn DeformationField> =
                Arc::new(AmbientFourierField::new(seed, FIELD_AMPLITUDE, patch.ambient().dim(), FIELD_MODES));
            let field: Arc<dyn DeformationField> = if patch.is_closed() {
                base
            } else {
                Arc::new(BoundaryBump::new(base, patch.domain().clone()))
            };
            Deformation::new(field)
        })
        .collect()
}

fn first_variation_section(ctx: &Context) -> Result<Section, CliError> {
    let tol = &ctx.cfg.tolerances;
    let fields = deformations(ctx);
    let resolution = match ctx.cfg.resolution {
        Some(_) => ctx.mesh.resolution.clone(),
        None => ctx.zoo.variation_resolution.clone(),
    };
    let mut s = Section::new("first-variation");
    s.notes.push(format!("resolution {resolution:?}"));
    let opts = VariationOptions::new(resolution);
    let mut table = Table::new(["p", "field", "lhs", "rhs", "abs_gap", "rel_gap"].map(String::from).to_vec());
    for &p in &ctx.ps {
        let reports = first_variation_checks(&ctx.zoo.patch, &fields, p, &opts)?;
        for (i, r) in reports.iter().enumerate() {
            table.push(vec![p as f64, i as f64, r.lhs, r.rhs, r.abs_gap, r.rel_gap]);
            let label = format!("p={p} field {i} ({})", r.field);
            s.verdicts.push(if r.rhs.abs() < tol.first_variation_abs {
                Verdict::below(format!("{label} absolute gap"), r.abs_gap, tol.first_variation_abs)
            } else {
                Verdict::below(format!("{label} relative gap"), r.rel_gap, tol.first_variation_rel)
            });
        }
    }
    s.table = table;
    Ok(s)
}

fn tube_window(ctx: &Context) -> Result<f64, CliError> {
    let mut w = focal_radius(&ctx.zoo.patch, &ctx.mesh)?.min(ctx.zoo.patch.scale());
    if let Some(c) = ctx.space_form_c() {
        if c > 0.0 {
            w = w.min(std::f64::consts::PI / (2.0 * c.sqrt()));
        }
    }
    Ok(w)
}

fn tube_section(ctx: &Context) -> Result<Section, CliError> {
    let tol = &ctx.cfg.tolerances;
    let window = tube_window(ctx)?;
    let radii: Vec<f64> = RADIUS_FRACTIONS.iter().map(|f| f * window).collect();
    let rep = tube_report(&ctx.zoo.patch, &ctx.mesh, &radii)?;
    let mut s = Section::new("tube");
    let mut cols: Vec<String> = ["r", "formula", "numeric"].map(String::from).to_vec();
    cols.extend((0..rep.totals.len()).map(|p| format!("term_p{p}")));
    let mut table = Table::new(cols);
    for (i, &r) in rep.radii.iter().enumerate() {
        let mut row = vec![r, rep.formula[i], rep.numeric.as_ref().map_or(f64::NAN, |v| v[i])];
        row.extend(&rep.contributions[i]);
        table.push(row);
    }
    s.table = table;
    s.totals.insert("focal_radius".into(), rep.focal_radius);
    for (p, mp) in rep.totals.iter().enumerate() {
        s.totals.insert(format!("M_{}", 2 * p), *mp);
    }
    for (k, ck) in &rep.sphere_constants {
        s.totals.insert(format!("C_{k}"), *ck);
    }
    match &rep.numeric {
        Some(num) => {
            for (i, r) in rep.radii.iter().enumerate() {
                let gap = (num[i] - rep.formula[i]).abs() / rep.formula[i].abs().max(f64::MIN_POSITIVE);
                s.verdicts.push(Verdict::below(format!("numeric vs formula at r={r:e}"), gap, tol.tube_rel));
            }
        }
        None => s.notes.push("numeric tube oracle runs in Euclidean ambients only".into()),
    }
    for (i, v) in rep.formula.iter().enumerate() {
        if !v.is_finite() {
            s.verdicts.push(Verdict::below(format!("formula finite at r={:e}", rep.radii[i]), f64::INFINITY, f64::MAX));
        }
    }
    Ok(s)
}

fn austere_sections(ctx: &Context) -> Result<Vec<Section>, CliError> {
    let tol = &ctx.cfg.tolerances;
    let patch = &ctx.zoo.patch;
    let rep = austerity_check(patch, &ctx.mesh, ctx.cfg.xi_samples, ctx.cfg.seed, tol.pairing)?;
    let mut s = Section::new("austerity");
    s.totals.insert("pairing_residual_max".into(), rep.max_pairing_residual);
    s.totals.insert("austere".into(), f64::from(u8::from(rep.austere)));
    s.totals.insert("sample_count".into(), rep.sample_count as f64);
    for &p in &ctx.ps {
        s.totals.insert(format!("signed_K_{}_min", 2 * p), rep.signed_k_min[p]);
        s.totals.insert(format!("H_{}_max", 2 * p + 1), rep.h_odd_max[p]);
        if rep.austere {
            s.verdicts.push(Verdict::at_least(format!("(-1)^p K_{}", 2 * p), rep.signed_k_min[p], -tol.sign));
            s.verdicts.push(Verdict::below(format!("|H_{}|", 2 * p + 1), rep.h_odd_max[p], tol.h_odd));
        }
    }
    let mut out = vec![s];
    if ctx.space_form_c().is_some() {
        let opts = TubularOptions {
            seed: ctx.cfg.seed,
            norm_tol: tol.minimality_norm,
            derivative_tol: tol.minimality_derivative,
            field_amplitude: FIELD_AMPLITUDE,
            ..TubularOptions::default()
        };
        let t = tubular_minimality_report(patch, &ctx.mesh, &opts)?;
        let mut sec = Section::new("tubular-minimality");
        let mut table = Table::new(["r", "dV_dt"].map(String::from).to_vec());
        for (r, d) in t.radii.iter().zip(&t.volume_derivatives) {
            table.push(vec![*r, *d]);
        }
        sec.table = table;
        for (p, ((hf, hm), l)) in t.h_f_max.iter().zip(&t.h_m_max).zip(&t.l_max).enumerate() {
            sec.totals.insert(format!("H_{}_max", 2 * p + 1), *hf);
            sec.totals.insert(format!("HM_{}_max", 2 * p + 1), *hm);
            sec.totals.insert(format!("L_{}_max", 2 * p), *l);
        }
        for (name, flag) in ["tube_critical", "relatively_minimal", "H_vanishes", "HM_vanishes"].iter().zip(t.flags) {
            sec.totals.insert(format!("flag_{name}"), f64::from(u8::from(flag)));
        }
        sec.notes.push(format!("deformation field: {}", t.field));
        sec.verdicts.push(Verdict::at_least("four conditions unanimous", f64::from(u8::from(t.unanimous)), 1.0));
        if rep.austere {
            sec.verdicts.push(Verdict::at_least("austere implies tubular minimal", f64::from(u8::from(t.flags[0])), 1.0));
        }
        out.push(sec);
    }
    Ok(out)
}
