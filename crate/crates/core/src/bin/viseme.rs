//! Command line front end: cluster, transcode, homophones, score, sweep,
//! validate.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use viseme::clustering;
use viseme::confusion::{sum_folds, ConfusionCounts};
use viseme::inventory::{validate_dictionary_coverage, PhonemeInventory};
use viseme::lexicon::{find_homophones, transcode, P2VMap, PronunciationDictionary};
use viseme::scoring::{score_transcripts, AlignCosts, Transcript};
use viseme::simulator::{sweep, ChannelModel, SimulationConfig, SweepInput};

const VERSION: &str = env!("CARGO_PKG_VERSION");

const EXIT_PARSE: u8 = 2;
const EXIT_NOTHING_TO_CLUSTER: u8 = 3;
const EXIT_UNDEFINED_SCORE: u8 = 4;

#[derive(Parser)]
#[command(
    name = "viseme",
    version,
    about = "Phoneme-to-viseme map derivation, lexicon transcoding, homophone analysis, transcript scoring and a simulated recognition sweep"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster fold confusion matrices into a P2V map hierarchy
    Cluster(ClusterArgs),
    /// Transcode a pronunciation dictionary through a P2V map
    Transcode(TranscodeArgs),
    /// Report visual homophones of a dictionary under a P2V map
    Homophones(HomophonesArgs),
    /// Score a hypothesis transcript against a reference
    Score(ScoreArgs),
    /// Run the correctness-vs-class-count sweep with a simulated recognizer
    Sweep(SweepArgs),
    /// Check a dictionary against a phoneme inventory
    Validate(ValidateArgs),
}

#[derive(Args)]
struct ClusterArgs {
    /// Confusion CSV files; several files are treated as folds and summed
    #[arg(required = true)]
    confusion: Vec<PathBuf>,
    /// Category file (`<label> <V|C>`); defaults to the bundled BEEP set
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Inputs are HTK `HResults -p` confusion tables, not CSV
    #[arg(long)]
    hresults: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "speaker")]
    speaker: String,
    /// Output directory for map files, trace.csv and meta.txt
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TranscodeArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    map: PathBuf,
    /// Fail on dictionary phonemes the map does not cover (default: V00)
    #[arg(long)]
    strict: bool,
    /// Output file; stdout when omitted
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HomophonesArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    map: PathBuf,
    #[arg(long)]
    strict: bool,
    /// Write the CSV report here (text summary still goes to --out/stdout)
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    /// Reference transcript (simple or MLF format)
    #[arg(long = "ref", value_name = "REF")]
    reference: PathBuf,
    #[arg(long)]
    hyp: PathBuf,
    /// Alignment costs as `sub,del,ins`
    #[arg(long, default_value = "10,7,7")]
    costs: String,
    /// Write per-utterance counts CSV here
    #[arg(long)]
    per_utterance: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Measured phoneme confusion CSVs (folds, summed); mutually exclusive
    /// with --identity-channel
    #[arg(long)]
    confusion: Vec<PathBuf>,
    /// Simulate the phoneme recognition stage with an identity-plus-noise
    /// channel instead of measured confusions
    #[arg(long, conflicts_with = "confusion")]
    identity_channel: bool,
    #[arg(long)]
    dict: PathBuf,
    /// Reference word transcript
    #[arg(long)]
    transcript: PathBuf,
    #[arg(long)]
    categories: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 20)]
    test_utterances: usize,
    /// Channel error scale; 0 disables noise
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Exponent of the (M/m0) training-dilution term
    #[arg(long, default_value_t = 1.0)]
    dilution: f64,
    #[arg(long, default_value = "speaker")]
    speaker: String,
    /// Output CSV (`M,C,A,homophone_groups,stderr_C`)
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Exit nonzero when the dictionary uses phonemes outside the inventory
    #[arg(long)]
    strict: bool,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

/// Outputs created by the running command; removed when the command fails so
/// no partial files survive.
struct Outputs {
    created: Vec<PathBuf>,
}

impl Outputs {
    fn new() -> Self {
        Outputs {
            created: Vec::new(),
        }
    }

    fn write(&mut self, path: &Path, content: &str) -> CmdResult {
        fs::write(path, content).map_err(|e| {
            Failure::parse(format!("cannot write {}: {}", path.display(), e))
        })?;
        self.created.push(path.to_path_buf());
        Ok(())
    }

    fn cleanup(&self) {
        for path in &self.created {
            if path.is_dir() {
                let _ = fs::remove_dir_all(path);
            } else {
                let _ = fs::remove_file(path);
            }
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .map_err(|e| Failure::parse(format!("cannot read {}: {}", path.display(), e)))
}

fn load_inventory(path: &Option<PathBuf>) -> Result<PhonemeInventory, Failure> {
    match path {
        Some(p) => PhonemeInventory::parse(&read(p)?)
            .map_err(|e| Failure::parse(format!("{}: {}", p.display(), e))),
        None => Ok(PhonemeInventory::beep46()),
    }
}

fn load_dict(path: &Path) -> Result<PronunciationDictionary, Failure> {
    PronunciationDictionary::parse(&read(path)?)
        .map_err(|e| Failure::parse(format!("{}: {}", path.display(), e)))
}

fn load_map(path: &Path) -> Result<P2VMap, Failure> {
    P2VMap::parse(&read(path)?).map_err(|e| Failure::parse(format!("{}: {}", path.display(), e)))
}

fn load_transcript(path: &Path) -> Result<Transcript, Failure> {
    Transcript::parse(&read(path)?)
        .map_err(|e| Failure::parse(format!("{}: {}", path.display(), e)))
}

fn load_confusion_folds(paths: &[PathBuf], hresults: bool) -> Result<ConfusionCounts, Failure> {
    let mut folds = Vec::with_capacity(paths.len());
    for path in paths {
        let text = read(path)?;
        let k = if hresults {
            ConfusionCounts::parse_hresults(&text)
        } else {
            ConfusionCounts::parse_csv(&text)
        }
        .map_err(|e| Failure::parse(format!("{}: {}", path.display(), e)))?;
        folds.push(k);
    }
    sum_folds(&folds).map_err(|e| Failure::parse(e.to_string()))
}

fn emit(out: &Option<PathBuf>, outputs: &mut Outputs, content: &str) -> CmdResult {
    match out {
        Some(path) => outputs.write(path, content),
        None => {
            print!("{}", content);
            Ok(())
        }
    }
}

fn stamp(seed: u64) -> String {
    format!("# viseme {} seed={}\n", VERSION, seed)
}

fn cmd_cluster(args: &ClusterArgs, outputs: &mut Outputs) -> CmdResult {
    let inv = load_inventory(&args.categories)?;
    let total = load_confusion_folds(&args.confusion, args.hresults)?;
    let hierarchy = clustering::build_hierarchy(&total, &inv, args.seed, &args.speaker).map_err(
        |e| match e {
            clustering::ClusterError::NothingToCluster => Failure {
                code: EXIT_NOTHING_TO_CLUSTER,
                message: e.to_string(),
            },
            other => Failure::parse(other.to_string()),
        },
    )?;
    let fresh = !args.out.exists();
    clustering::write_hierarchy(&args.out, &hierarchy, args.confusion.len()).map_err(|e| {
        Failure::parse(format!("cannot write {}: {}", args.out.display(), e))
    })?;
    if fresh {
        outputs.created.push(args.out.clone());
    }
    eprintln!(
        "wrote {} maps (M = {}..2), trace and meta to {}",
        hierarchy.maps.len(),
        hierarchy.initial_classes,
        args.out.display()
    );
    Ok(())
}

fn cmd_transcode(args: &TranscodeArgs, outputs: &mut Outputs) -> CmdResult {
    let dict = load_dict(&args.dict)?;
    let map = load_map(&args.map)?;
    let lex = transcode(&dict, &map, args.strict)
        .map_err(|e| Failure::parse(e.to_string()))?;
    let mut content = stamp(0);
    content.push_str(&lex.serialize());
    emit(&args.out, outputs, &content)
}

fn cmd_homophones(args: &HomophonesArgs, outputs: &mut Outputs) -> CmdResult {
    let dict = load_dict(&args.dict)?;
    let map = load_map(&args.map)?;
    let lex = transcode(&dict, &map, args.strict)
        .map_err(|e| Failure::parse(e.to_string()))?;
    let report = find_homophones(&lex);
    if let Some(csv) = &args.csv {
        let mut content = stamp(0);
        content.push_str(&report.to_csv());
        outputs.write(csv, &content)?;
    }
    emit(&args.out, outputs, &report.to_text())
}

fn parse_costs(spec: &str) -> Result<AlignCosts, Failure> {
    let parts: Vec<&str> = spec.split(',').collect();
    let parse = |s: &str| -> Result<u32, Failure> {
        let v: u32 = s
            .trim()
            .parse()
            .map_err(|_| Failure::parse(format!("bad cost {:?}", s)))?;
        if v == 0 {
            return Err(Failure::parse("costs must be strictly positive"));
        }
        Ok(v)
    };
    match parts.as_slice() {
        [sub, del, ins] => Ok(AlignCosts {
            sub: parse(sub)?,
            del: parse(del)?,
            ins: parse(ins)?,
        }),
        _ => Err(Failure::parse("--costs expects `sub,del,ins`")),
    }
}

fn cmd_score(args: &ScoreArgs, outputs: &mut Outputs) -> CmdResult {
    let reference = load_transcript(&args.reference)?;
    let hypothesis = load_transcript(&args.hyp)?;
    let costs = parse_costs(&args.costs)?;
    let report = score_transcripts(&reference, &hypothesis, costs).map_err(|e| match e {
        viseme::scoring::ScoringError::UndefinedScore => Failure {
            code: EXIT_UNDEFINED_SCORE,
            message: e.to_string(),
        },
        other => Failure::parse(other.to_string()),
    })?;
    if let Some(path) = &args.per_utterance {
        outputs.write(path, &report.per_utterance_csv())?;
    }
    let mut content = stamp(0);
    content.push_str(&report.summary_line());
    content.push('\n');
    content.push_str(&report.to_csv());
    emit(&args.out, outputs, &content)
}

fn cmd_sweep(args: &SweepArgs, outputs: &mut Outputs) -> CmdResult {
    let inv = load_inventory(&args.categories)?;
    let dict = load_dict(&args.dict)?;
    let transcript = load_transcript(&args.transcript)?;
    let config = SimulationConfig {
        seed: args.seed,
        folds: args.folds,
        test_utterances: args.test_utterances,
    };
    let run = |input: SweepInput<'_>| {
        sweep(
            input,
            &inv,
            &dict,
            &transcript,
            &config,
            args.noise,
            args.dilution,
            &args.speaker,
        )
    };
    let result = if args.identity_channel {
        // Channel over the phonemes the dictionary actually uses.
        let mut used: Vec<String> = dict
            .entries()
            .flat_map(|(_, prons)| prons.iter().flatten().cloned())
            .collect();
        used.sort();
        used.dedup();
        let channel = ChannelModel::uniform_noise(used, args.noise);
        run(SweepInput::Channel(&channel))
    } else {
        if args.confusion.is_empty() {
            return Err(Failure::parse(
                "give --confusion CSVs or --identity-channel",
            ));
        }
        let total = load_confusion_folds(&args.confusion, false)?;
        run(SweepInput::Counts(&total))
    };
    let (_, result) = result.map_err(|e| Failure::parse(e.to_string()))?;
    let mut content = format!("# viseme {}\n", VERSION);
    content.push_str(&result.to_csv());
    outputs.write(&args.out, &content)
}

fn cmd_validate(args: &ValidateArgs) -> CmdResult {
    let inv = load_inventory(&args.categories)?;
    let dict = load_dict(&args.dict)?;
    let report = validate_dictionary_coverage(&inv, &dict);
    println!(
        "inventory: {} phonemes; dictionary: {} words",
        inv.len(),
        dict.len()
    );
    if report.unknown.is_empty() {
        println!("unknown phonemes: none");
    } else {
        println!("unknown phonemes: {}", report.unknown.join(" "));
    }
    if report.unused.is_empty() {
        println!("unused inventory phonemes: none");
    } else {
        println!("unused inventory phonemes: {}", report.unused.join(" "));
    }
    if args.strict && !report.unknown.is_empty() {
        return Err(Failure::parse(format!(
            "dictionary uses {} phoneme(s) outside the inventory",
            report.unknown.len()
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut outputs = Outputs::new();
    let result = match &cli.command {
        Command::Cluster(args) => cmd_cluster(args, &mut outputs),
        Command::Transcode(args) => cmd_transcode(args, &mut outputs),
        Command::Homophones(args) => cmd_homophones(args, &mut outputs),
        Command::Score(args) => cmd_score(args, &mut outputs),
        Command::Sweep(args) => cmd_sweep(args, &mut outputs),
        Command::Validate(args) => cmd_validate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            outputs.cleanup();
            ExitCode::from(failure.code)
        }
    }
}
