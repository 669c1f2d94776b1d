use std::fs;
use std::path::Path;

use textbal::augment::{augment_every, expand_minority, SynonymLexicon};
use textbal::corpus::{fit_label_codec, load_dataset, write_dataset, Dataset, Schema};
use textbal::grid::{
    append_results, gen_synthetic, parse_experiment, run_config, run_grid_config, write_manifest, EdaMode,
    EdaSpec, ExperimentSpec, GridConfig, ResultRow, RunContext, SynthSpec, RESULTS_HEADER,
};
use textbal::metrics::{confusion, scores_with, TABLE_HEADER};
use textbal::rebalance::{apply_plan, class_counts, make_plan};
use textbal::textprep::{clean_dataset, iqr_filter_report};
use textbal::trainkit::{predict, ModelCheckpoint};
use textbal::wordpiece::{load_vocab, train_vocab, VocabModel};
use textbal::Error;

use crate::{Cli, Command, InputArgs, ModeArg};

type CliResult<T> = Result<T, Box<dyn std::error::Error>>;

impl InputArgs {
    fn schema(&self) -> Schema {
        Schema {
            id: self.id_column.clone(),
            title: self.title_column.clone(),
            body: self.text_column.clone(),
            label: self.label_column.clone(),
            delimiter: self.delimiter,
        }
    }

    fn load(&self) -> CliResult<Dataset> {
        Ok(load_dataset(&self.input, &self.schema())?)
    }
}

fn experiment(cli: &Cli) -> CliResult<ExperimentSpec> {
    let mut spec = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            parse_experiment(&text)?
        }
        None => ExperimentSpec::new("cli"),
    };
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    Ok(spec)
}

fn lexicon(path: Option<&Path>) -> CliResult<SynonymLexicon> {
    Ok(match path {
        Some(p) => SynonymLexicon::load(p)?,
        None => SynonymLexicon::bundled(),
    })
}

fn cleaned(spec: &ExperimentSpec, d: &Dataset) -> CliResult<Dataset> {
    Ok(if spec.clean.enabled {
        clean_dataset(d, &spec.clean.to_config()?)
    } else {
        d.clone()
    })
}

fn vocab_for(spec: &ExperimentSpec, d: &Dataset, path: Option<&Path>) -> CliResult<VocabModel> {
    let v = match path {
        Some(p) => load_vocab(p)?,
        None => {
            let texts: Vec<String> = d.iter().map(|r| r.text()).collect();
            train_vocab(&texts, spec.tokenizer.vocab_size)?
        }
    };
    Ok(v.with_frame(spec.tokenizer.frame)
        .with_max_word_chars(spec.tokenizer.max_word_chars))
}

fn print_rows(rows: &[ResultRow]) {
    println!("{RESULTS_HEADER}");
    for r in rows {
        let seed = r.seed.map_or_else(|| "median".to_string(), |s| s.to_string());
        println!(
            "{},{seed},{:.4},{:.4},{:.4},{:.2}",
            r.name, r.accuracy, r.f1_macro, r.f1_weighted, r.seconds
        );
    }
}

pub fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Prep {
            input,
            output,
            no_filter,
        } => prep(&cli, input, output.as_deref(), *no_filter),
        Command::Vocab {
            input,
            output,
            size,
            load,
        } => vocab(&cli, input, output.as_deref(), *size, load.as_deref()),
        Command::Augment {
            input,
            output,
            rate,
            mode,
            lexicon,
        } => augment(&cli, input, output, *rate, *mode, lexicon.as_deref()),
        Command::Balance { input, rate, vocab } => balance(&cli, input, *rate, vocab.as_deref()),
        Command::Train { input, lexicon } => train(&cli, input, lexicon.as_deref()),
        Command::Eval {
            input,
            checkpoint,
            vocab,
        } => eval(&cli, input, checkpoint, vocab),
        Command::Grid { overwrite } => grid(&cli, *overwrite),
        Command::Synth {
            output,
            counts,
            noise,
            lexicon_out,
        } => synth(&cli, output, counts.clone(), *noise, lexicon_out.as_deref()),
    }
}

fn prep(cli: &Cli, input: &InputArgs, output: Option<&Path>, no_filter: bool) -> CliResult<()> {
    let spec = experiment(cli)?;
    let d = cleaned(&spec, &input.load()?)?;
    let (kept, report) = iqr_filter_report(&d, &spec.iqr.to_config())?;
    println!("records: {}", d.len());
    println!(
        "word counts: q1 {} q3 {} fences [{}, {}]",
        report.q1, report.q3, report.lower, report.upper
    );
    println!("kept {} dropped {}", report.kept, report.dropped.len());
    for id in &report.dropped {
        println!("  dropped {id}");
    }
    if let Some(path) = output {
        let out = if no_filter { &d } else { &kept };
        write_dataset(path, out, &input.schema())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn vocab(
    cli: &Cli,
    input: &InputArgs,
    output: Option<&Path>,
    size: Option<usize>,
    load: Option<&Path>,
) -> CliResult<()> {
    let mut spec = experiment(cli)?;
    if let Some(s) = size {
        spec.tokenizer.vocab_size = s;
    }
    let d = cleaned(&spec, &input.load()?)?;
    let v = vocab_for(&spec, &d, load)?;
    let words: usize = d.iter().map(|r| r.text().split_whitespace().count()).sum();
    let unk: usize = d.iter().map(|r| v.unk_count(&r.text())).sum();
    println!("vocabulary size: {}", v.len());
    println!("unknown words: {unk} of {words}");
    if let Some(path) = output {
        v.save(path)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn augment(
    cli: &Cli,
    input: &InputArgs,
    output: &Path,
    rate: Option<f64>,
    mode: Option<ModeArg>,
    lex_path: Option<&Path>,
) -> CliResult<()> {
    let spec = experiment(cli)?;
    let mut eda = spec.eda.clone().unwrap_or(EdaSpec {
        rate: 0.2,
        mode: EdaMode::Minority,
        augment: Default::default(),
    });
    if let Some(r) = rate {
        eda.rate = r;
    }
    match mode {
        Some(ModeArg::Minority) => eda.mode = EdaMode::Minority,
        Some(ModeArg::All) => eda.mode = EdaMode::All,
        None => {}
    }
    eda.augment.seed = spec.seed;
    let lex = lexicon(lex_path)?;
    let d = cleaned(&spec, &input.load()?)?;
    let out = match eda.mode {
        EdaMode::Minority => expand_minority(&d, eda.rate, &eda.augment, &lex)?,
        EdaMode::All => augment_every(&d, &eda.augment, &lex)?,
    };
    println!("class,before,after");
    for (class, n) in out.class_counts() {
        println!(
            "{class},{},{n}",
            d.class_counts().get(class).copied().unwrap_or(0)
        );
    }
    write_dataset(output, &out, &input.schema())?;
    println!("wrote {} records to {}", out.len(), output.display());
    Ok(())
}

fn balance(cli: &Cli, input: &InputArgs, rate: Option<f64>, vocab_path: Option<&Path>) -> CliResult<()> {
    let spec = experiment(cli)?;
    let r = rate
        .or(spec.oversampling.as_ref().map(|o| o.rate))
        .ok_or("no sample rate: pass --rate or set oversampling.rate in the config")?;
    let d = cleaned(&spec, &input.load()?)?;
    let codec = fit_label_codec(&d)?;
    let v = vocab_for(&spec, &d, vocab_path)?;
    let seqs = d
        .iter()
        .map(|rec| {
            Ok(v.encode(&rec.text(), spec.tokenizer.capacity)
                .with_label(codec.encode(&rec.label)?)
                .with_id(rec.id.clone()))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let plan = make_plan(&class_counts(&seqs), r)?;
    print!("{}", plan.report(Some(&codec)));
    let out = apply_plan(&seqs, &plan, spec.seed)?;
    println!("after oversampling: {} sequences", out.len());
    for (k, n) in class_counts(&out) {
        println!("  {} {n}", codec.decode(k)?);
    }
    let dir = &cli.out_dir;
    fs::create_dir_all(dir)?;
    let path = dir.join("plan.txt");
    fs::write(&path, plan.report(Some(&codec)))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn train(cli: &Cli, input: &InputArgs, lex_path: Option<&Path>) -> CliResult<()> {
    let spec = experiment(cli)?;
    let lex = lexicon(lex_path)?;
    let data = input.load()?;
    let out = run_config(
        &spec,
        &data,
        spec.seed,
        RunContext {
            lexicon: &lex,
            out_dir: Some(&cli.out_dir),
        },
    )?;
    println!("{TABLE_HEADER}");
    println!("{}", out.scores.table_row(&spec.name));
    if let Some(v) = &out.validation_scores {
        println!("{}", v.table_row(&format!("{} (validation)", spec.name)));
    }
    let dir = textbal::grid::run_dir(&cli.out_dir, &spec.name, spec.seed);
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn eval(cli: &Cli, input: &InputArgs, checkpoint: &Path, vocab_path: &Path) -> CliResult<()> {
    let spec = experiment(cli)?;
    let ckpt = ModelCheckpoint::load(checkpoint)?;
    let v = vocab_for(&spec, &Dataset::empty(), Some(vocab_path))?;
    let d = cleaned(&spec, &input.load()?)?;
    let seqs = d
        .iter()
        .map(|rec| {
            Ok(v.encode(&rec.text(), spec.tokenizer.capacity)
                .with_label(ckpt.codec.encode(&rec.label)?))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let (preds, _) = predict(&ckpt.model, &seqs)?;
    let golds: Vec<usize> = seqs.iter().map(|s| s.label_id).collect();
    let s = scores_with(
        &confusion(&preds, &golds, ckpt.codec.num_classes())?,
        spec.macro_average,
    )?;
    println!("{TABLE_HEADER}");
    println!("{}", s.table_row(&spec.name));
    for (k, f) in s.per_class_f1.iter().enumerate() {
        println!("  f1[{}] {f:.4}", ckpt.codec.decode(k)?);
    }
    Ok(())
}

fn grid(cli: &Cli, overwrite: bool) -> CliResult<()> {
    let path = cli.config.as_ref().ok_or("grid needs --config <grid file>")?;
    let mut cfg = GridConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    let report = run_grid_config(&cfg, Some(&cli.out_dir))?;
    let rows = report.all_rows();
    print_rows(&rows);
    let results = cli.out_dir.join("results.csv");
    append_results(&results, &rows, overwrite)?;
    let manifest = cli.out_dir.join("manifest.json");
    write_manifest(&manifest, &cfg, &report)?;
    println!("wrote {} and {}", results.display(), manifest.display());
    Ok(())
}

fn synth(
    cli: &Cli,
    output: &Path,
    counts: Option<Vec<usize>>,
    noise: Option<f64>,
    lexicon_out: Option<&Path>,
) -> CliResult<()> {
    let mut spec = SynthSpec::default();
    if let Some(c) = counts {
        spec.counts = c;
    }
    if let Some(n) = noise {
        spec.noise = n;
    }
    if let Some(s) = cli.seed {
        spec.seed = s;
    }
    let d = gen_synthetic(&spec)?;
    write_dataset(output, &d, &Schema::default())?;
    println!("wrote {} records to {}", d.len(), output.display());
    if let Some(path) = lexicon_out {
        fs::write(path, textbal::grid::synthetic_lexicon(&spec).to_file_string())?;
        println!("wrote lexicon to {}", path.display());
    }
    Ok(())
}
