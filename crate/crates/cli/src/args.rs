use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hatcc::bp::{BpOptions, Init};
use hatcc::generators::{PermutationMode, Topology};
use hatcc::holonomy::{HolonomyOptions, SupportPolicy, DEFAULT_INTERFACE_CAP};
use hatcc::nerve::{BackboneOptions, Objective, RootRule};
use hatcc::sectors::{OrbitRule, SectorMode, SectorOptions};

/// Bad flag combinations that clap cannot express; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Parser, Debug)]
#[command(name = "hatcc", version, about = "Holonomy-aware inference on discrete factor graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a benchmark instance and its ground-truth sidecar.
    Gen(GenArgs),
    /// Run one inference method and print JSON.
    Infer(InferArgs),
    /// Print the nerve, backbone and per-chord holonomy report.
    Diagnose(DiagnoseArgs),
    /// Cartesian sweep over corruption and noise levels, written as CSV.
    Sweep(SweepArgs),
    /// Run several methods on one instance and score them against the oracle.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[command(subcommand)]
    pub family: Family,
    /// Instance path; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Sidecar path; defaults to `<out stem>.truth.json` next to `--out`.
    #[arg(long, global = true)]
    pub truth: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Family {
    /// Four binary variables on a ring of copy constraints.
    FourCycle {
        #[arg(long, value_enum)]
        parity: Parity,
    },
    /// ℤ_k synchronization with corrupted off-tree edges.
    Zk {
        #[arg(long)]
        k: usize,
        #[command(flatten)]
        topo: TopoArgs,
        #[arg(long, default_value_t = 0.1)]
        eta: f64,
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Pairwise permutation constraints.
    Perm {
        #[arg(long)]
        domain: usize,
        #[command(flatten)]
        topo: TopoArgs,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, value_enum, default_value_t = PermMode::Random)]
        mode: PermMode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Binary grid MRF with random couplings and fields.
    Grid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0.5)]
        coupling: f64,
        #[arg(long, default_value_t = 0.1)]
        field: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Random model whose factor nerve is a tree.
    Tree {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        card: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Binary chain with one factor closing the loop.
    Chain {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PermMode {
    Random,
    Consistent,
    Identity,
    Shift,
}

impl From<PermMode> for PermutationMode {
    fn from(m: PermMode) -> Self {
        match m {
            PermMode::Random => PermutationMode::Random,
            PermMode::Consistent => PermutationMode::Consistent,
            PermMode::Identity => PermutationMode::Identity,
            PermMode::Shift => PermutationMode::Shift,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum TopologyKind {
    Cycle,
    Grid,
    Random,
    Tree,
    Chain,
}

#[derive(Args, Debug, Clone)]
pub struct TopoArgs {
    #[arg(long, value_enum)]
    pub topology: TopologyKind,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    /// Extra-edge probability for random topologies.
    #[arg(long, default_value_t = 0.3)]
    pub p: f64,
}

impl TopoArgs {
    pub fn topology(&self) -> anyhow::Result<Topology> {
        let need = |v: Option<usize>, flag: &str| {
            v.ok_or_else(|| usage(format!("--topology {:?} needs --{flag}", self.topology).to_lowercase()))
        };
        Ok(match self.topology {
            TopologyKind::Cycle => Topology::Cycle { n: need(self.n, "n")? },
            TopologyKind::Grid => Topology::Grid { rows: need(self.rows, "rows")?, cols: need(self.cols, "cols")? },
            TopologyKind::Random => Topology::Random { n: need(self.n, "n")?, p: self.p },
            TopologyKind::Tree => Topology::Tree { n: need(self.n, "n")? },
            TopologyKind::Chain => Topology::Chain { n: need(self.n, "n")? },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Bp,
    Hatcc,
    Sectors,
    Oracle,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bp => "bp",
            Method::Hatcc => "hatcc",
            Method::Sectors => "sectors",
            Method::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitKind {
    Uniform,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Support,
    Dominant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SectorModeArg {
    SectorBp,
    DecompositionOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrbitArg {
    Scc,
    Group,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RootArg {
    MaxDegree,
    LexFirst,
}

#[derive(Args, Debug, Clone)]
pub struct BackboneArgs {
    /// Spanning forest objective; `min` is an ablation.
    #[arg(long, value_enum, default_value_t = ObjectiveArg::Max)]
    pub objective: ObjectiveArg,
    #[arg(long, value_enum, default_value_t = RootArg::MaxDegree)]
    pub root: RootArg,
}

impl BackboneArgs {
    pub fn options(&self) -> BackboneOptions {
        BackboneOptions {
            objective: match self.objective {
                ObjectiveArg::Max => Objective::Max,
                ObjectiveArg::Min => Objective::Min,
            },
            root: match self.root {
                RootArg::MaxDegree => RootRule::MaxDegree,
                RootArg::LexFirst => RootRule::LexFirst,
            },
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct HolonomyArgs {
    /// Kernel support used for holonomy.
    #[arg(long, value_enum, default_value_t = PolicyKind::Support)]
    pub policy: PolicyKind,
    /// Absolute tolerance for `support`, relative tolerance for `dominant`.
    #[arg(long, default_value_t = 0.0)]
    pub support_tol: f64,
    /// Largest admissible interface state count.
    #[arg(long, default_value_t = DEFAULT_INTERFACE_CAP)]
    pub interface_cap: usize,
}

impl HolonomyArgs {
    pub fn options(&self) -> HolonomyOptions {
        let policy = match self.policy {
            PolicyKind::Support => SupportPolicy::Support { tol: self.support_tol },
            PolicyKind::Dominant => SupportPolicy::Dominant { rel_tol: self.support_tol },
        };
        HolonomyOptions { policy, cap: self.interface_cap }
    }
}

#[derive(Args, Debug, Clone)]
pub struct MethodOpts {
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0.0)]
    pub damping: f64,
    #[arg(long, value_enum, default_value_t = InitKind::Uniform)]
    pub init: InitKind,
    /// Seed for random message initialization.
    #[arg(long, default_value_t = 0)]
    pub init_seed: u64,
    #[command(flatten)]
    pub backbone: BackboneArgs,
    #[command(flatten)]
    pub holonomy: HolonomyArgs,
    /// Base variable for sectors; highest degree when absent.
    #[arg(long)]
    pub base: Option<usize>,
    #[arg(long, value_enum, default_value_t = SectorModeArg::SectorBp)]
    pub sector_mode: SectorModeArg,
    #[arg(long, value_enum, default_value_t = OrbitArg::Scc)]
    pub orbit: OrbitArg,
    /// Relative tolerance of the dominant-entry support used for sector generators.
    #[arg(long, default_value_t = 1e-9)]
    pub sector_tol: f64,
    /// Refuse exhaustive enumeration above this many joint states.
    #[arg(long, default_value_t = hatcc::oracle::DEFAULT_CAP)]
    pub oracle_cap: usize,
    /// Clamp each log-score term from below instead of reporting -inf.
    #[arg(long, allow_hyphen_values = true)]
    pub log_floor: Option<f64>,
}

impl MethodOpts {
    pub fn bp(&self) -> BpOptions {
        BpOptions {
            max_iters: self.max_iters,
            threshold: self.threshold,
            damping: self.damping,
            init: match self.init {
                InitKind::Uniform => Init::Uniform,
                InitKind::Random => Init::Random { seed: self.init_seed },
            },
            ..Default::default()
        }
    }

    pub fn sectors(&self) -> SectorOptions {
        SectorOptions {
            mode: match self.sector_mode {
                SectorModeArg::SectorBp => SectorMode::SectorBp,
                SectorModeArg::DecompositionOnly => SectorMode::DecompositionOnly,
            },
            orbit: match self.orbit {
                OrbitArg::Scc => OrbitRule::Scc,
                OrbitArg::Group => OrbitRule::Group,
            },
            policy: SupportPolicy::Dominant { rel_tol: self.sector_tol },
            bp: self.bp(),
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct InferArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Hatcc)]
    pub method: Method,
    #[command(flatten)]
    pub opts: MethodOpts,
    /// Print only the structural checksum.
    #[arg(long)]
    pub checksum: bool,
    /// Include wall-clock timings in the output.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug)]
pub struct DiagnoseArgs {
    pub instance: PathBuf,
    /// Write the nerve with backbone and chords as Graphviz DOT.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    #[command(flatten)]
    pub backbone: BackboneArgs,
    #[command(flatten)]
    pub holonomy: HolonomyArgs,
    #[arg(long)]
    pub checksum: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepFamily {
    Zk,
    Perm,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub family: SweepFamily,
    #[command(flatten)]
    pub topo: TopoArgs,
    /// Alphabet size: `k` for ℤ_k, domain size for permutations.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Corruption levels (ℤ_k) or permutation noise levels.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub eps: Vec<f64>,
    /// Mixing weights η (ℤ_k only).
    #[arg(long, value_delimiter = ',', default_value = "0.1")]
    pub eta: Vec<f64>,
    /// Number of seeds, starting at `--seed-start`.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed_start: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bp,sectors")]
    pub methods: Vec<Method>,
    #[arg(long, value_enum, default_value_t = PermMode::Random)]
    pub perm_mode: PermMode,
    #[command(flatten)]
    pub opts: MethodOpts,
    /// CSV path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fill the `time_ms` column (otherwise 0, keeping output byte-stable).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    pub instance: PathBuf,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "bp,hatcc,sectors,oracle")]
    pub methods: Vec<Method>,
    #[command(flatten)]
    pub opts: MethodOpts,
    #[arg(long)]
    pub timings: bool,
}
