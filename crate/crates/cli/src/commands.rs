use std::io::Read;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use cmient_core::bayes::{random_fig1, random_fig2, random_fig3};
use cmient_core::dpi::{run_sweep, search_cmi_vs_mi, SweepConfig, SweepKind, DEFAULT_SLACK};
use cmient_core::ed::{classical_ed, quantum_ed};
use cmient_core::ef::{classical_ef, quantum_ef, ExtensionBudget, Family, OptReport};
use cmient_core::info::{
    conditional_mutual_information, entropy, mutual_information, relative_entropy, Axis, JointPmf,
};
use cmient_core::quantum::{
    build_separable, quantum_cmi, quantum_mutual_information, random_density_matrix, subsystems,
    tensor, von_neumann_entropy, DensityMatrix,
};
use cmient_core::random::{dirichlet_uniform, rng_for};
use serde::Serialize;

use crate::input::{load, Document};
use crate::output::{render, Format};
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "cmient",
    version,
    about = "CMI-based entanglement measures and inequality checks"
)]
pub struct Cli {
    /// Seed for every stochastic step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Entropies and (conditional) mutual information, in nats.
    Info(InfoArgs),
    /// Entanglement of formation of a bipartite pmf or density matrix.
    Ef(EfArgs),
    /// Entanglement of distillation from two copies of a source.
    Ed(EdArgs),
    /// Randomized checks of the inequalities and identities.
    Check(CheckArgs),
    /// Random or standard instances as JSON documents.
    Gen(GenArgs),
}

/// Axis groups are comma-separated names, e.g. `a,a'`.
#[derive(Debug, Args)]
#[command(group(ArgGroup::new("quantity").required(true).args([
    "entropy", "mi", "cmi", "relent", "vn_entropy", "qmi", "qcmi",
])))]
pub struct InfoArgs {
    /// Input document; standard input when absent or `-`.
    pub input: Option<PathBuf>,
    #[arg(long, value_name = "A")]
    pub entropy: Option<String>,
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub mi: Option<Vec<String>>,
    #[arg(long, num_args = 3, value_names = ["A", "B", "C"])]
    pub cmi: Option<Vec<String>>,
    /// `D(P//Q)` with `Q` read from this file.
    #[arg(long, value_name = "Q_FILE")]
    pub relent: Option<PathBuf>,
    #[arg(long, value_name = "A")]
    pub vn_entropy: Option<String>,
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    pub qmi: Option<Vec<String>>,
    #[arg(long, num_args = 3, value_names = ["A", "B", "C"])]
    pub qcmi: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct BudgetArgs {
    #[arg(long, default_value_t = 4)]
    pub restarts: usize,
    #[arg(long, default_value_t = 400)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
}

impl BudgetArgs {
    fn budget(&self, n_alpha: usize, seed: u64) -> ExtensionBudget {
        ExtensionBudget {
            n_alpha,
            restarts: self.restarts,
            iterations: self.iterations,
            seed,
            tolerance: self.tolerance,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FamilyArg {
    K0,
    K1,
    K2,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::K0 => Family::K0,
            FamilyArg::K1 => Family::K1,
            FamilyArg::K2 => Family::K2,
        }
    }
}

#[derive(Debug, Args)]
pub struct EfArgs {
    pub input: Option<PathBuf>,
    /// Extension family; required for density matrices.
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Conditioner size (ensemble size, or extension dimension for k0).
    #[arg(long)]
    pub n_alpha: Option<usize>,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Args)]
pub struct EdArgs {
    /// Either one two-copy net, or the two sources `X` and `X'`.
    #[arg(num_args = 0..=2)]
    pub inputs: Vec<PathBuf>,
    /// Conditioner size `N_lambda` (dimension for density matrices).
    #[arg(long)]
    pub n_lambda: Option<usize>,
    /// Let Bob's map see Alice's outputs.
    #[arg(long)]
    pub comm_arrow: bool,
    #[command(flatten)]
    pub budget: BudgetArgs,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// One of dpi-re, dpi-cmi, ed-le-ef, fig3-ids, cmi-vs-mi.
    pub kind: String,
    /// Default 1000; 200 for ed-le-ef.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Default 2.
    #[arg(long)]
    pub min_card: Option<usize>,
    /// Default 4; 2 for ed-le-ef.
    #[arg(long)]
    pub max_card: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SLACK)]
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GenKind {
    Pmf,
    Fig1,
    Fig2,
    Fig3,
    Density,
    Bell,
    Product,
    Separable,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(value_enum)]
    pub kind: GenKind,
    /// Comma-separated cardinalities or dimensions. pmf and density: one per
    /// axis (default 2,2); fig1: a,b,alpha; fig2: a,b,alpha,alpha';
    /// fig3: lambda,x,y,a,b; bell: d; product: da,db; separable: da,db,n_alpha.
    #[arg(long, value_delimiter = ',')]
    pub cards: Vec<usize>,
    /// Axis or subsystem names for pmf and density (default a,b,c,...).
    #[arg(long, value_delimiter = ',')]
    pub names: Vec<String>,
    /// Rank of a random density matrix (default full).
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub comm_arrow: bool,
}

pub struct Outcome {
    pub body: String,
    pub violation: bool,
}

fn emit<T: Serialize>(report: &T, format: Format, violation: bool) -> Result<Outcome, CliError> {
    let body = render(report, format)
        .map_err(|e| CliError::Invariant(format!("cannot serialize report: {e}")))?;
    Ok(Outcome { body, violation })
}

pub fn execute(cli: &Cli, stdin: &mut dyn Read) -> Result<Outcome, CliError> {
    match &cli.command {
        Command::Info(a) => info(a, cli, stdin),
        Command::Ef(a) => ef(a, cli, stdin),
        Command::Ed(a) => ed(a, cli, stdin),
        Command::Check(a) => check(a, cli),
        Command::Gen(a) => generate(a, cli),
    }
}

#[derive(Debug, Serialize)]
pub struct InfoReport {
    pub quantity: &'static str,
    pub arguments: Vec<Vec<String>>,
    pub value: f64,
    pub unit: &'static str,
}

fn group(s: &str) -> Vec<&str> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .collect()
}

fn density(doc: &Document) -> Result<&DensityMatrix, CliError> {
    match doc {
        Document::Density(r) => Ok(r),
        other => Err(CliError::Usage(format!(
            "expected a density matrix, got a {}",
            other.kind()
        ))),
    }
}

fn info(a: &InfoArgs, cli: &Cli, stdin: &mut dyn Read) -> Result<Outcome, CliError> {
    let doc = load(a.input.as_deref(), stdin)?;
    let (quantity, args, value): (&'static str, Vec<String>, f64) = if let Some(s) = &a.entropy {
        (
            "entropy",
            vec![s.clone()],
            entropy(&doc.joint()?, &group(s))?,
        )
    } else if let Some(v) = &a.mi {
        (
            "mi",
            v.clone(),
            mutual_information(&doc.joint()?, &group(&v[0]), &group(&v[1]))?,
        )
    } else if let Some(v) = &a.cmi {
        let p = doc.joint()?;
        (
            "cmi",
            v.clone(),
            conditional_mutual_information(&p, &group(&v[0]), &group(&v[1]), &group(&v[2]))?,
        )
    } else if let Some(q_path) = &a.relent {
        let q = load(Some(q_path), stdin)?.joint()?;
        (
            "relent",
            vec![q_path.display().to_string()],
            relative_entropy(&doc.joint()?, &q)?,
        )
    } else if let Some(s) = &a.vn_entropy {
        let rho = density(&doc)?.partial_trace(&group(s))?;
        ("vn-entropy", vec![s.clone()], von_neumann_entropy(&rho)?)
    } else if let Some(v) = &a.qmi {
        (
            "qmi",
            v.clone(),
            quantum_mutual_information(density(&doc)?, &group(&v[0]), &group(&v[1]))?,
        )
    } else if let Some(v) = &a.qcmi {
        let rho = density(&doc)?;
        (
            "qcmi",
            v.clone(),
            quantum_cmi(rho, &group(&v[0]), &group(&v[1]), &group(&v[2]))?,
        )
    } else {
        unreachable!("clap requires one quantity")
    };
    let report = InfoReport {
        quantity,
        arguments: args
            .iter()
            .map(|s| group(s).into_iter().map(String::from).collect())
            .collect(),
        value,
        unit: "nats",
    };
    emit(&report, cli.format, false)
}

fn ef(a: &EfArgs, cli: &Cli, stdin: &mut dyn Read) -> Result<Outcome, CliError> {
    let doc = load(a.input.as_deref(), stdin)?;
    let report: OptReport = match &doc {
        Document::Density(rho) => {
            let family = a.family.ok_or_else(|| {
                CliError::Config("--family is required for density matrices".into())
            })?;
            let n = a
                .n_alpha
                .unwrap_or_else(|| ExtensionBudget::for_state(rho).n_alpha);
            quantum_ef(rho, family.into(), &a.budget.budget(n, cli.seed))?
        }
        other => {
            if a.family.is_some() {
                return Err(CliError::Usage(
                    "--family applies only to density matrices".into(),
                ));
            }
            let p = other.source_pmf()?;
            let n = a.n_alpha.unwrap_or_else(|| p.len());
            classical_ef(&p, &a.budget.budget(n, cli.seed))?
        }
    };
    emit(&report, cli.format, false)
}

fn ed(a: &EdArgs, cli: &Cli, stdin: &mut dyn Read) -> Result<Outcome, CliError> {
    let n_lambda = a
        .n_lambda
        .ok_or_else(|| CliError::Config("--n-lambda is required".into()))?;
    let budget = a.budget.budget(n_lambda, cli.seed);
    let docs: Vec<Document> = if a.inputs.is_empty() {
        vec![load(None, stdin)?]
    } else {
        a.inputs
            .iter()
            .map(|p| load(Some(p), stdin))
            .collect::<Result<_, _>>()?
    };
    let report = match docs.as_slice() {
        [Document::Fig2(spec)] => {
            let m = |f: &cmient_core::bayes::Fig1Spec| Document::Fig1(f.clone()).source_pmf();
            classical_ed(
                &m(spec.x())?,
                &m(spec.x_prime())?,
                n_lambda,
                &budget,
                spec.comm_arrow() || a.comm_arrow,
            )?
        }
        [Document::Density(x), Document::Density(xp)] => {
            quantum_ed(x, xp, n_lambda, &budget, a.comm_arrow)?
        }
        [x, xp] => classical_ed(
            &x.source_pmf()?,
            &xp.source_pmf()?,
            n_lambda,
            &budget,
            a.comm_arrow,
        )?,
        [other] => {
            return Err(CliError::Usage(format!(
                "a single input must be a two-copy net, got a {}",
                other.kind()
            )))
        }
        _ => unreachable!("clap limits inputs to two"),
    };
    emit(&report, cli.format, false)
}

fn check(a: &CheckArgs, cli: &Cli) -> Result<Outcome, CliError> {
    let kind = a.kind.replace('_', "-");
    let is_ed = kind == "ed-le-ef";
    let config = SweepConfig {
        trials: a.trials.unwrap_or(if is_ed { 200 } else { 1000 }),
        seed: cli.seed,
        min_card: a.min_card.unwrap_or(2),
        max_card: a.max_card.unwrap_or(if is_ed { 2 } else { 4 }),
        slack: a.slack,
    };
    if kind == "cmi-vs-mi" {
        return match search_cmi_vs_mi(&config) {
            Ok(w) => emit(&w, cli.format, false),
            Err(cmient_core::Error::InvalidBudget(msg)) if msg.contains("exhausted") => emit(
                &serde_json::json!({ "config": config, "found": false }),
                cli.format,
                true,
            ),
            Err(e) => Err(e.into()),
        };
    }
    let sweep = SweepKind::from_str(&kind).map_err(|_| {
        CliError::Usage(format!(
            "unknown check `{}`; expected dpi-re, dpi-cmi, ed-le-ef, fig3-ids or cmi-vs-mi",
            a.kind
        ))
    })?;
    let report = run_sweep(sweep, &config)?;
    let violation = !report.violations.is_empty();
    emit(&report, cli.format, violation)
}

fn cards(given: &[usize], default: &[usize]) -> Result<Vec<usize>, CliError> {
    if given.is_empty() {
        return Ok(default.to_vec());
    }
    if given.len() != default.len() {
        return Err(CliError::Usage(format!(
            "expected {} cardinalities, got {}",
            default.len(),
            given.len()
        )));
    }
    Ok(given.to_vec())
}

fn names(given: &[String], n: usize) -> Result<Vec<String>, CliError> {
    if given.is_empty() {
        return Ok((0..n)
            .map(|i| ((b'a' + i as u8) as char).to_string())
            .collect());
    }
    if given.len() != n {
        return Err(CliError::Usage(format!(
            "expected {n} names, got {}",
            given.len()
        )));
    }
    Ok(given.to_vec())
}

fn generate(a: &GenArgs, cli: &Cli) -> Result<Outcome, CliError> {
    let seed = cli.seed;
    let f = cli.format;
    match a.kind {
        GenKind::Pmf => {
            let sizes = if a.cards.is_empty() {
                vec![2, 2]
            } else {
                a.cards.clone()
            };
            let axes: Vec<Axis> = names(&a.names, sizes.len())?
                .into_iter()
                .zip(&sizes)
                .map(|(n, &s)| Axis::new(n, s))
                .collect();
            let mut rng = rng_for(seed, 0);
            let w = dirichlet_uniform(&mut rng, sizes.iter().product());
            emit(&JointPmf::from_weights(axes, w)?, f, false)
        }
        GenKind::Fig1 => {
            let c = cards(&a.cards, &[2, 2, 2])?;
            emit(&random_fig1(seed, c[0], c[1], c[2])?, f, false)
        }
        GenKind::Fig2 => {
            let c = cards(&a.cards, &[2, 2, 2, 2])?;
            emit(
                &random_fig2(seed, c[0], c[1], c[2], c[3], a.comm_arrow)?,
                f,
                false,
            )
        }
        GenKind::Fig3 => {
            let c = cards(&a.cards, &[2, 2, 2, 2, 2])?;
            emit(&random_fig3(seed, c[0], c[1], c[2], c[3], c[4])?, f, false)
        }
        GenKind::Density => {
            let dims = if a.cards.is_empty() {
                vec![2, 2]
            } else {
                a.cards.clone()
            };
            let n = names(&a.names, dims.len())?;
            let subs = subsystems(
                &n.iter()
                    .map(String::as_str)
                    .zip(dims.iter().copied())
                    .collect::<Vec<_>>(),
            );
            let full: usize = dims.iter().product();
            emit(
                &random_density_matrix(seed, &subs, a.rank.unwrap_or(full))?,
                f,
                false,
            )
        }
        GenKind::Bell => {
            let c = cards(&a.cards, &[2])?;
            emit(
                &DensityMatrix::maximally_entangled("a", "b", c[0])?,
                f,
                false,
            )
        }
        GenKind::Product => {
            let c = cards(&a.cards, &[2, 2])?;
            let ra = random_density_matrix(seed, &subsystems(&[("a", c[0])]), a.rank.unwrap_or(1))?;
            let rb = random_density_matrix(
                seed.wrapping_add(1),
                &subsystems(&[("b", c[1])]),
                a.rank.unwrap_or(1),
            )?;
            emit(&tensor(&ra, &rb)?, f, false)
        }
        GenKind::Separable => {
            let c = cards(&a.cards, &[2, 2, 2])?;
            let rho = random_separable(seed, c[0], c[1], c[2], a.rank)?;
            emit(&rho, f, false)
        }
    }
}

/// `sum_alpha w_alpha rho_a^alpha ⊗ rho_b^alpha` over `(a, b)`.
pub fn random_separable(
    seed: u64,
    da: usize,
    db: usize,
    n_alpha: usize,
    rank: Option<usize>,
) -> Result<DensityMatrix, CliError> {
    let mut rng = rng_for(seed, 1);
    let weights = JointPmf::from_weights(
        vec![Axis::new("alpha", n_alpha)],
        dirichlet_uniform(&mut rng, n_alpha),
    )?;
    let member = |k: u64, name: &str, d: usize| {
        random_density_matrix(
            seed.wrapping_mul(31).wrapping_add(k),
            &subsystems(&[(name, d)]),
            rank.unwrap_or(d).min(d),
        )
    };
    let ens_a = (0..n_alpha as u64)
        .map(|k| member(2 * k, "a", da))
        .collect::<Result<Vec<_>, _>>()?;
    let ens_b = (0..n_alpha as u64)
        .map(|k| member(2 * k + 1, "b", db))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(build_separable(&ens_a, &ens_b, &weights)?.partial_trace(&["a", "b"])?)
}
