use std::collections::BTreeSet;
use std::fs;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use tagforge_core::io::{derive_seed, write_atomic};
use tagforge_core::synth::{SynthDescriptorConfig, SynthTagsConfig};
use tagforge_core::{
    aggregate_relevance, evalstats::read_marks, normalize_tag, suggest, EmConfig, FisherVector, Metric, NetConfig,
    Normalization, Query, SuggestConfig, T2VConfig,
};
use tagforge_service::SurveyStore;

use crate::args::*;
use crate::error::{at, data, CliError, Result};
use crate::{pipeline, stages};

struct Globals {
    seed: Option<u64>,
    threads: Option<usize>,
    force: bool,
}

impl Globals {
    /// An explicit stage seed wins; otherwise one is derived from the global
    /// seed; otherwise the stage default applies.
    fn seed(&self, explicit: Option<u64>, stage: &str, default: u64) -> u64 {
        explicit.unwrap_or_else(|| self.seed.map_or(default, |g| derive_seed(g, stage)))
    }
}

fn print(text: &str) {
    print!("{text}");
}

fn normalization(n: NormalizeArg) -> Normalization {
    match n {
        NormalizeArg::None => Normalization::None,
        NormalizeArg::Ssqrt => Normalization::Ssqrt,
        NormalizeArg::L2 => Normalization::L2,
        NormalizeArg::SsqrtL2 => Normalization::SsqrtL2,
    }
}

fn coords(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn load_fv(path: &Path) -> Result<FisherVector> {
    FisherVector::load(path).map_err(data)
}

pub fn run(cli: Cli) -> Result<()> {
    let g = Globals { seed: cli.seed, threads: cli.threads, force: cli.force };
    match cli.command {
        Command::Corpus(CorpusCmd::Build { input, out, min_count }) => {
            if min_count == 0 {
                return Err(CliError::Usage("--min-count must be at least 1".into()));
            }
            let (corpus, diag) = stages::corpus_build(&input, &out, min_count)?;
            println!(
                "{} sentences ({} trainable), {} stems in vocabulary; {} records read, {} malformed, {} empty, {} tags dropped",
                corpus.sentences.len(),
                corpus.trainable_sentences().count(),
                corpus.vocab.len(),
                diag.records_seen,
                diag.malformed_records,
                diag.empty_records,
                diag.dropped_tags
            );
        }
        Command::T2v(T2vCmd::Train { corpus, dim, window, negatives, epochs, lr, subsample, seed, out }) => {
            let cfg = T2VConfig {
                dim,
                window,
                negatives,
                epochs,
                initial_lr: lr,
                subsample_t: subsample,
                seed: g.seed(seed, "t2v", 1),
                threads: g.threads.unwrap_or(1),
            };
            cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
            let (tv, stats) = stages::t2v_train(&corpus, &cfg, &out)?;
            println!("{} stems, dim {}; final epoch loss {:.4}", tv.len(), tv.dim(), stats.epoch_loss.last().copied().unwrap_or(f64::NAN));
        }
        Command::T2v(T2vCmd::Nn { model, query, k, metric, include_self }) => {
            if k == 0 {
                return Err(CliError::Usage("--k must be at least 1".into()));
            }
            let tv = stages::load_t2v(&model)?;
            let stem = normalize_tag(&query).ok_or_else(|| data(format!("query '{query}' has no usable characters")))?.stem;
            let exclude: BTreeSet<String> = if include_self { BTreeSet::new() } else { [stem.clone()].into() };
            let metric = match metric {
                MetricArg::L2 => Metric::L2,
                MetricArg::Cosine => Metric::Cosine,
            };
            let hits = tv.nearest_tags(Query::Stem(&stem), k, metric, &exclude).map_err(|e| at(&model, e))?;
            for (i, (s, score)) in hits.iter().enumerate() {
                println!("{}\t{s}\t{score}", i + 1);
            }
        }
        Command::Gmm(GmmCmd::Fit { descriptors, k, seed, max_iters, labels, out }) => {
            if k == 0 {
                return Err(CliError::Usage("--k must be at least 1".into()));
            }
            let only = match &labels {
                Some(p) => Some(stages::labels(p)?.into_keys().collect::<BTreeSet<_>>()),
                None => None,
            };
            let cfg = EmConfig { seed: g.seed(seed, "gmm", 1), max_iters, ..Default::default() };
            let (_, report) = stages::gmm_fit(&descriptors, only.as_ref(), k, &cfg, &out)?;
            println!(
                "{} iterations, converged {}, log-likelihood {:.6}, {} components reseeded",
                report.iterations,
                report.converged,
                report.log_likelihood.last().copied().unwrap_or(f64::NAN),
                report.reseeded_components
            );
        }
        Command::Fv(FvCmd::Encode { gmm, descriptors, normalize, out }) => {
            let (n, degenerate) = stages::fv_encode(&gmm, &descriptors, normalization(normalize), &out)?;
            println!("{n} videos encoded");
            if degenerate > 0 {
                eprintln!("warning: {degenerate} all-zero encodings were left unnormalized");
            }
        }
        Command::Embed(EmbedCmd::Train { fv, labels, t2v, hidden, max_iters, lr, l2_reg, seed, out }) => {
            let cfg = NetConfig { hidden, max_iters, lr, l2_reg, seed: g.seed(seed, "embed", 1), ..Default::default() };
            let (outcome, _) = stages::embed_train(&fv, &labels, &t2v, &cfg, &out)?;
            println!(
                "{} pairs, {} iterations, loss {:.6}, training nearest-class accuracy {:.3}",
                outcome.pairs, outcome.iterations, outcome.best_loss, outcome.train_accuracy
            );
        }
        Command::Embed(EmbedCmd::Project { net, fv }) => {
            let net = stages::load_net(&net)?;
            let y = net.project(&load_fv(&fv)?.values).map_err(|e| at(&fv, e))?;
            println!("{}", coords(&y));
        }
        Command::Embed(EmbedCmd::ExportProj { net, fv, labels, out }) => {
            let net = stages::load_net(&net)?;
            let labels_map = stages::labels(&labels)?;
            let mut text = String::new();
            for f in stages::load_fvs(&fv)? {
                let Some(class) = labels_map.get(&f.video_id) else { continue };
                let y = net.project(&f.values).map_err(|e| data(format!("video '{}': {e}", f.video_id)))?;
                text.push_str(&format!("{}\t{class}\t{}\n", f.video_id, coords(&y)));
            }
            write_atomic(&out, text.as_bytes()).map_err(|e| at(&out, e))?;
        }
        Command::Suggest(a) => {
            if a.k == 0 {
                return Err(CliError::Usage("--k must be at least 1".into()));
            }
            let models = stages::SuggestModels::load(&a.net, &a.t2v, &a.destem)?;
            let cfg = SuggestConfig { k: a.k, exclude_stems: a.exclude.into_iter().collect(), collapse_to_surface: !a.no_collapse };
            let out = models.suggest(&load_fv(&a.fv)?, &cfg)?;
            match a.format {
                FormatArg::Tsv => print(&suggest::to_tsv(&out)),
                FormatArg::Json => println!("{}", serde_json::to_string(&out).expect("suggestions serialize")),
            }
        }
        Command::Eval(EvalCmd::Report { marks, labels, k, format, out }) => {
            let file = fs::File::open(&marks).map_err(|e| at(&marks, e))?;
            let marks_list = read_marks(file, &marks).map_err(data)?;
            let report = aggregate_relevance(&marks_list, &stages::labels(&labels)?, k).map_err(|e| at(&marks, e))?;
            let text = match format {
                FormatArg::Tsv => report.to_tsv(),
                FormatArg::Json => report.to_json() + "\n",
            };
            match out {
                Some(p) => write_atomic(&p, text.as_bytes()).map_err(|e| at(&p, e))?,
                None => print(&text),
            }
        }
        Command::Serve(a) => {
            let store = SurveyStore::open(&a.store, &a.marks).map_err(data)?;
            let addr: SocketAddr =
                format!("{}:{}", a.host, a.port).parse().map_err(|e| CliError::Usage(format!("bad address: {e}")))?;
            let runtime = tokio::runtime::Runtime::new().map_err(data)?;
            eprintln!("serving {} videos on http://{addr}/", store.videos().len());
            runtime.block_on(tagforge_service::serve(Arc::new(store), a.ui, addr)).map_err(|e| data(format!("{addr}: {e}")))?;
        }
        Command::Synth(SynthCmd::Descriptors { classes, per_class, n, d, seed, out, labels }) => {
            if classes == 0 || per_class == 0 || n == 0 || d == 0 {
                return Err(CliError::Usage("--classes, --per-class, --n and --d must be at least 1".into()));
            }
            let cfg = SynthDescriptorConfig { classes, per_class, n, d, seed: g.seed(seed, "synth_descriptors", 7), ..Default::default() };
            let labels = labels.unwrap_or_else(|| out.join("labels.tsv"));
            let count = stages::synth_descriptors_to(&cfg, &out, &labels)?;
            println!("{count} videos written");
        }
        Command::Synth(SynthCmd::Tags { classes, sentences, tags_per_sentence, seed, out }) => {
            if classes == 0 || tags_per_sentence == 0 {
                return Err(CliError::Usage("--classes and --tags-per-sentence must be at least 1".into()));
            }
            let cfg = SynthTagsConfig { classes, sentences, tags_per_sentence, seed: g.seed(seed, "synth_tags", 1), ..Default::default() };
            let count = stages::synth_tags(&cfg, &out)?;
            println!("{count} records written");
        }
        Command::Store(StoreCmd::Build { net, t2v, destem, fv, labels, k, media_prefix, out }) => {
            if k == 0 {
                return Err(CliError::Usage("--k must be at least 1".into()));
            }
            let models = stages::SuggestModels::load(&net, &t2v, &destem)?;
            let cfg = SuggestConfig { k, ..Default::default() };
            let n = stages::store_build(&models, &fv, &labels, &cfg, &media_prefix, &out)?;
            println!("{n} videos in store");
        }
        Command::Pipeline(PipelineCmd::Run { config }) => {
            pipeline::run(&config, pipeline::Overrides { seed: g.seed, threads: g.threads, force: g.force })?;
        }
    }
    Ok(())
}
