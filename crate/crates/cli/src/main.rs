//! `marc`: feasibility bounds, frontier searches, simulation and regression.
//!
//! Exit codes: 0 feasible or satisfied, 1 violated, 2 boundary, 3 usage or
//! input error.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use marc_core::models::*;
use marc_core::necessary::{self, cutset_psomarc, i_new_psomarc};
use marc_core::prob::{Alphabet, ConditionalKernel, JointTable};
use marc_core::regress;
use marc_core::scenario_file::{self, Document};
use marc_core::search::{SearchResult, SearchSpec, Stages};
use marc_core::sim::run_scheme;
use marc_core::spectral::maximal_correlation;
use marc_core::sufficient::{self, i_suff_psomarc, Scheme, Status};

const EXIT_VIOLATED: u8 = 1;
const EXIT_BOUNDARY: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "marc",
    version,
    about = "Correlated sources over multiple-access relay channels"
)]
struct Cli {
    /// Worker threads for searches and simulation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    /// Scenario file; overrides --channel/--sources.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long, default_value = "tables45")]
    channel: String,
    #[arg(long, default_value = "table6")]
    sources: String,
    /// Relay link capacity in bits per use (channel default when omitted).
    #[arg(long)]
    c3: Option<f64>,
}

impl ScenarioArgs {
    fn load(&self) -> anyhow::Result<MarcScenario> {
        match &self.scenario {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let mut sc = scenario_file::parse_scenario(&text)
                    .with_context(|| format!("in {}", path.display()))?;
                if let (Some(c3), Channel::Primitive(p)) = (self.c3, &mut sc.channel) {
                    p.c3 = c3;
                }
                Ok(sc)
            }
            None => {
                let ch: ChannelName = self.channel.parse()?;
                let src: SourceName = self.sources.parse()?;
                Ok(MarcScenario::named(ch, src, self.c3)?)
            }
        }
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Fine grid step; 1/step must be an integer.
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Coarse step of a two-stage search.
    #[arg(long, default_value_t = 0.05)]
    coarse_step: f64,
    /// Force a coarse pass followed by local refinement.
    #[arg(long, conflicts_with = "single_stage")]
    two_stage: bool,
    /// Force a single exhaustive pass.
    #[arg(long)]
    single_stage: bool,
}

impl GridArgs {
    fn spec(&self, free_params: usize) -> SearchSpec {
        let stages = if self.two_stage {
            Stages::CoarseThenRefine
        } else if self.single_stage {
            Stages::Single
        } else {
            SearchSpec::default_for(free_params).stages
        };
        match stages {
            Stages::Single => SearchSpec::single(self.step),
            Stages::CoarseThenRefine => SearchSpec::two_stage(self.step, self.coarse_step),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundKind {
    Thm1,
    Thm2,
    Thm3,
    Prop1,
    Thm4,
    Thm5,
    Prop2bc,
    Cutset,
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Isuff,
    Inew,
    Cutset,
}

#[derive(Subcommand)]
enum Cmd {
    /// Source entropies, maximal correlation and alphabet sizes.
    Info {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Print the scenario in file format as well.
        #[arg(long)]
        dump: bool,
    },
    /// Evaluate a sufficient or necessary condition.
    Bounds {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        scheme: BoundKind,
        /// Encoder file (kernels and auxiliary tables); defaults to x_i = s_i.
        #[arg(long)]
        encoders: Option<PathBuf>,
        /// Also print per-constraint records merged over relay and destination.
        #[arg(long)]
        merged: bool,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Grid search of a frontier on a primitive channel.
    Search {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_enum)]
        target: Target,
        /// Treat W3 as (S1, S2) for the inew objective.
        #[arg(long)]
        w3_sources: bool,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Simulate the zero-error scheme with x_i = s_i.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(short = 'n', long, default_value_t = 100)]
        blocklength: usize,
        #[arg(short = 'B', long, default_value_t = 1000)]
        blocks: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the regression criteria and print one line per criterion.
    Regress {
        /// Reduced grids and block counts.
        #[arg(long)]
        quick: bool,
        /// Run a single criterion by number.
        #[arg(long)]
        only: Option<u8>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = set_threads(n) {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> anyhow::Result<()> {
    if n == 0 {
        bail!("--threads must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(n: usize) -> anyhow::Result<()> {
    if n == 0 {
        bail!("--threads must be at least 1");
    }
    Ok(())
}

fn run(cmd: Cmd) -> anyhow::Result<u8> {
    match cmd {
        Cmd::Info { scenario, dump } => cmd_info(&scenario.load()?, dump),
        Cmd::Bounds {
            scenario,
            scheme,
            encoders,
            merged,
            grid,
        } => {
            let sc = scenario.load()?;
            let doc = match encoders {
                Some(path) => Document::parse(
                    &std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?,
                )
                .with_context(|| format!("in {}", path.display()))?,
                None => Document::default(),
            };
            cmd_bounds(&sc, scheme, &doc, merged, &grid)
        }
        Cmd::Search {
            scenario,
            target,
            w3_sources,
            grid,
        } => cmd_search(&scenario.load()?, target, w3_sources, &grid),
        Cmd::Simulate {
            scenario,
            blocklength,
            blocks,
            seed,
        } => {
            let sc = scenario.load()?;
            let r = run_scheme(&sc, blocklength, blocks, seed, Default::default())?;
            print!("{r}");
            Ok(if r.destination_errors == 0 {
                0
            } else {
                EXIT_VIOLATED
            })
        }
        Cmd::Regress { quick, only } => cmd_regress(quick, only),
    }
}

fn cmd_info(sc: &MarcScenario, dump: bool) -> anyhow::Result<u8> {
    let s = &sc.sources;
    println!("H(S1,S2)={:.9}", s.entropy(&[S1, S2], &[])?);
    println!("H(S1|S2)={:.9}", s.entropy(&[S1], &[S2])?);
    println!("H(S2|S1)={:.9}", s.entropy(&[S2], &[S1])?);
    println!("rho(S1,S2)={:.9}", maximal_correlation(&sc.source_pair())?);
    println!("|S1|={}", sc.s1_alphabet().len());
    println!("|S2|={}", sc.s2_alphabet().len());
    match &sc.channel {
        Channel::Primitive(p) => {
            println!("channel=primitive");
            println!("c3={}", p.c3);
            println!("|X1|={}", p.x1_alphabet().len());
            println!("|X2|={}", p.x2_alphabet().len());
            println!("deterministic={}", p.is_deterministic());
        }
        Channel::General(ch) => {
            println!("channel=general");
            println!("relay_outputs={}", ch.relay_outputs().join(","));
            println!("dest_outputs={}", ch.dest_outputs().join(","));
        }
    }
    if dump {
        print!("{}", scenario_file::to_text(sc));
    }
    Ok(0)
}

fn status_code(s: Status) -> u8 {
    match s {
        Status::StrictPass | Status::Pass => 0,
        Status::Boundary => EXIT_BOUNDARY,
        Status::Violated => EXIT_VIOLATED,
    }
}

/// Input kernel `p(x1, x2 | s1, s2, aux)`: from the document, or `x_i = s_i`
/// independent of the auxiliary.
fn input_pair_kernel(
    sc: &MarcScenario,
    doc: &Document,
    aux: &Alphabet,
) -> anyhow::Result<ConditionalKernel> {
    if let Some(k) = doc.kernel_for(&[X1, X2]) {
        return Ok(k.clone());
    }
    let s1 = sc.s1_alphabet().clone();
    let s2 = sc.s2_alphabet().clone();
    let out = vec![s1.renamed(X1), s2.renamed(X2)];
    Ok(ConditionalKernel::deterministic(
        vec![s1, s2, aux.clone()],
        out,
        |g| vec![g[0], g[1]],
    )?)
}

fn cmd_bounds(
    sc: &MarcScenario,
    kind: BoundKind,
    doc: &Document,
    merged: bool,
    grid: &GridArgs,
) -> anyhow::Result<u8> {
    let sufficient_scheme = match kind {
        BoundKind::Thm1 => Some(Scheme::Thm1),
        BoundKind::Thm2 => Some(Scheme::Thm2),
        BoundKind::Thm3 => Some(Scheme::Thm3),
        BoundKind::Prop1 => Some(Scheme::Prop1),
        _ => None,
    };
    if let Some(scheme) = sufficient_scheme {
        let rep = sufficient::eval(scheme, sc, &doc.encoders(sc))?;
        print!("{rep}");
        if merged {
            for r in rep.combined() {
                println!("{r}");
            }
        }
        return Ok(status_code(rep.status()));
    }
    let rep = match kind {
        BoundKind::Thm4 | BoundKind::Thm5 => {
            let q = doc
                .table_over(&[Q])
                .cloned()
                .unwrap_or_else(|| JointTable::singleton(Q));
            let x12 = input_pair_kernel(sc, doc, &q.axes()[0])?;
            let x3 = doc.kernel_for(&[X3]);
            if matches!(kind, BoundKind::Thm4) {
                necessary::eval_thm4(sc, &q, &x12, x3)?
            } else {
                necessary::eval_thm5(sc, &q, &x12, x3)?
            }
        }
        BoundKind::Prop2bc => {
            let v = doc
                .kernel_for(&[V])
                .cloned()
                .unwrap_or_else(|| ConditionalKernel::unconditional(&JointTable::singleton(V)));
            let x12 = input_pair_kernel(sc, doc, &v.out()[0])?;
            necessary::eval_prop2_broadcast(sc, &v, &x12, doc.kernel_for(&[X3]))?
        }
        BoundKind::Cutset => {
            let Some(ch) = sc.channel.as_psomarc() else {
                bail!("the cut-set frontier is implemented for primitive channels");
            };
            let r = cutset_psomarc(
                ch,
                &grid.spec(ch.x1_alphabet().len() * ch.x2_alphabet().len() - 1),
            )?;
            let h = sc.sources.entropy(&[S1, S2], &[])?;
            print!("{r}");
            println!("H(S1,S2)={h:.9}");
            let ok = h <= r.best_value;
            println!("satisfied={ok}");
            return Ok(if ok { 0 } else { EXIT_VIOLATED });
        }
        _ => unreachable!(),
    };
    print!("{rep}");
    Ok(status_code(rep.status()))
}

fn cmd_search(sc: &MarcScenario, target: Target, w3: bool, grid: &GridArgs) -> anyhow::Result<u8> {
    let Some(ch) = sc.channel.as_psomarc() else {
        bail!("frontier searches need a primitive channel");
    };
    let joint_params = ch.x1_alphabet().len() * ch.x2_alphabet().len() - 1;
    let result: SearchResult = match target {
        Target::Cutset => cutset_psomarc(ch, &grid.spec(joint_params))?,
        Target::Inew => i_new_psomarc(ch, &sc.sources, &grid.spec(joint_params), w3)?,
        Target::Isuff => {
            let (space, _) = sufficient::per_symbol_space(sc, ch);
            i_suff_psomarc(sc, &grid.spec(space.free_params()))?
        }
    };
    let name = match target {
        Target::Cutset => "cutset",
        Target::Inew => "inew",
        Target::Isuff => "isuff",
    };
    println!("target={name}");
    print!("{result}");
    println!("H(S1,S2)={:.9}", sc.sources.entropy(&[S1, S2], &[])?);
    Ok(0)
}

fn cmd_regress(quick: bool, only: Option<u8>) -> anyhow::Result<u8> {
    let outcomes = match only {
        None => regress::run_all(quick),
        Some(id) => {
            let o = match id {
                1 => regress::criterion1(),
                2 => regress::criterion2(),
                3 => regress::criterion3(quick),
                4 => regress::criterion4(),
                5 => regress::criterion5(quick),
                6 => regress::criterion6(quick),
                7 => regress::criterion7(quick),
                8 => regress::criterion8(quick),
                9 => regress::criterion9(),
                10 => regress::criterion10(quick),
                _ => bail!("criteria are numbered 1 to 10"),
            };
            vec![o?]
        }
    };
    let mut failed = 0;
    for o in &outcomes {
        println!("{o}");
        failed += usize::from(!o.pass);
    }
    println!("passed={} failed={failed}", outcomes.len() - failed);
    Ok(if failed == 0 { 0 } else { EXIT_VIOLATED })
}
