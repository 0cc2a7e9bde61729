use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use fedvit::attack::{run_attack_suite, save_png, AttackSuiteConfig, DEFAULT_LAMBDA};
use fedvit::ckks::{CkksContext, CkksParams};
use fedvit::fed::{
    aggregate_encrypted, average_heads, decrypt_vector, derive_seed, encrypt_tokens, encrypted_inference,
    fit_poly_activation, run_round, ClassifierHead, GlobalClassifier, RoundConfig, PAPER_REFERENCE, POLY_RANGE,
};
use fedvit::io::*;
use fedvit::vit::{argmax, load_image_dir, synthetic_for, train_local, TrainConfig, VitConfig, VitModel};

#[derive(Parser)]
#[command(
    name = "fedvit",
    version,
    about = "Federated ViT feature sharing under CKKS encryption"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// Model and round scale.
    #[arg(long, global = true, env = "FEDVIT_PROFILE", default_value = "desk",
          value_parser = ["desk", "paper", "tiny"])]
    profile: String,
    /// CKKS parameter set.
    #[arg(long, global = true, default_value = "paper", value_parser = ["paper", "small"])]
    ckks: String,
}

#[derive(Subcommand)]
enum Command {
    /// Generate secret, public, relinearization and rotation keys.
    Keygen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic (or directory-loaded) dataset file.
    GenData {
        #[arg(long, default_value_t = 600)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        client: u32,
        /// Load `<dir>/<class>/*.png|jpg` instead of generating images.
        #[arg(long)]
        from_dir: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a client model.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 30)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-4)]
        lr: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 1)]
        client: u32,
    },
    /// Extract CLS tokens.
    Extract {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        client: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypt a token file with the public key into a server bundle.
    Encrypt {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        tokens: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average bundles under encryption.
    Aggregate {
        #[arg(long, num_args = 1.., required = true)]
        bundles: Vec<PathBuf>,
        /// Writes `aggregate.fprd` and `head.fhed`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Encrypted classification of aggregated tokens.
    Infer {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        aggregate: PathBuf,
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = POLY_RANGE.0, allow_negative_numbers = true)]
        poly_lo: f64,
        #[arg(long, default_value_t = POLY_RANGE.1, allow_negative_numbers = true)]
        poly_hi: f64,
    },
    /// Decrypt predictions with the secret key and print class indices.
    Decrypt {
        #[arg(long)]
        keys: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, default_value_t = 3)]
        classes: usize,
    },
    /// Run the model inversion suite on synthetic linear data.
    Attack {
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = 300)]
        train: usize,
        #[arg(long, default_value_t = 100)]
        eval: usize,
        /// Report destination; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the first few originals and reconstructions as PNG.
        #[arg(long)]
        dump_images: Option<PathBuf>,
    },
    /// One complete round: all four configurations plus the ledger.
    Round {
        #[arg(long)]
        clients: Option<usize>,
        /// TOML overrides applied on top of the profile.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-role message directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report destination; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Wall-clock timings destination.
        #[arg(long)]
        timings: Option<PathBuf>,
    },
    /// Render a round report as tables.
    Report {
        file: PathBuf,
        #[arg(long)]
        timings: Option<PathBuf>,
    },
}

fn context(name: &str) -> Result<CkksContext> {
    Ok(CkksContext::new(CkksParams::by_name(name)?)?)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    Ok(read_file(path)?)
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn emit(report: &Report, dest: Option<&Path>) -> Result<()> {
    match dest {
        Some(p) => write(p, report.render().as_bytes()),
        None => {
            print!("{}", report.render());
            Ok(())
        }
    }
}

fn keygen(g: &Global, out: &Path) -> Result<()> {
    let ctx = context(&g.ckks)?;
    let keys = ctx.keygen(derive_seed(g.seed, 4, 0))?;
    write(&out.join("secret.fkey"), &serialize_secret_key(&keys.secret, &ctx))?;
    write(&out.join("public.fkey"), &serialize_public_key(&keys.public, &ctx))?;
    write(&out.join("relin.fkey"), &serialize_relin_key(&keys.relin, &ctx))?;
    write(&out.join("galois.fkey"), &serialize_galois_keys(&keys.galois, &ctx))?;
    eprintln!(
        "keys for N={} ({} rotation keys) written to {}",
        ctx.ring_degree(),
        keys.galois.len(),
        out.display()
    );
    Ok(())
}

fn gen_data(g: &Global, count: usize, client: u32, from_dir: Option<&Path>, out: &Path) -> Result<()> {
    let vit = VitConfig::by_name(&g.profile)?;
    let ds = match from_dir {
        Some(dir) => load_image_dir(dir, vit.image_h, vit.image_w)?,
        None => synthetic_for(&vit, count, derive_seed(g.seed, 1, u64::from(client - 1))),
    };
    write(out, &serialize_dataset(&ds)?)?;
    eprintln!(
        "{} images, {} classes -> {}",
        ds.len(),
        ds.class_names.len(),
        out.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(g: &Global, data: &Path, out: &Path, epochs: usize, lr: f64, batch_size: usize, client: u32) -> Result<()> {
    let vit = VitConfig::by_name(&g.profile)?;
    let ds = deserialize_dataset(&read(data)?)?;
    let mut model = VitModel::init(vit, &mut ChaCha20Rng::seed_from_u64(derive_seed(g.seed, 2, 0)))?;
    let tc = TrainConfig {
        epochs,
        learning_rate: lr,
        batch_size,
        seed: derive_seed(g.seed, 3, u64::from(client - 1)),
        ..TrainConfig::paper()
    };
    let t = Instant::now();
    let rep = train_local(&mut model, &ds, &tc)?;
    for (e, (l, a)) in rep.epoch_loss.iter().zip(&rep.epoch_accuracy).enumerate() {
        eprintln!("epoch {:>3}  loss {l:.5}  train accuracy {a:.4}", e + 1);
    }
    eprintln!("{:.2} s per epoch", t.elapsed().as_secs_f64() / epochs.max(1) as f64);
    write(out, &serialize_model(&model)?)
}

fn extract(model: &Path, data: &Path, client: u32, out: &Path) -> Result<()> {
    let model = deserialize_model(&read(model)?)?;
    let ds = deserialize_dataset(&read(data)?)?;
    let tokens = ds
        .images
        .iter()
        .map(|i| model.extract_cls(i))
        .collect::<fedvit::Result<Vec<_>>>()?;
    let tf = TokenFile {
        client_id: client,
        dim: model.config().hidden_dim,
        tokens,
        labels: ds.labels.clone(),
    };
    write(out, &serialize_tokens(&tf)?)?;
    eprintln!("{} tokens of dim {} -> {}", tf.tokens.len(), tf.dim, out.display());
    Ok(())
}

fn encrypt(g: &Global, keys: &Path, tokens: &Path, model: &Path, out: &Path) -> Result<()> {
    let ctx = context(&g.ckks)?;
    let pk = deserialize_public_key(&read(&keys.join("public.fkey"))?, &ctx)?;
    let tf = deserialize_tokens(&read(tokens)?)?;
    let head = ClassifierHead::from_model(&deserialize_model(&read(model)?)?);
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(g.seed, 5, u64::from(tf.client_id)));
    let t = Instant::now();
    let bundle = encrypt_tokens(&ctx, &pk, tf.client_id, &tf.tokens, head, &mut rng)?;
    let bytes = serialize_bundle(&bundle)?;
    write(out, &bytes)?;
    let per = bundle
        .tokens
        .first()
        .map_or(0, |t| t.chunks.iter().map(|c| c.serialized_size()).sum::<usize>());
    eprintln!(
        "{} tokens encrypted in {:.2} s; {per} bytes per token; bundle {} bytes",
        bundle.token_count(),
        t.elapsed().as_secs_f64(),
        bytes.len()
    );
    Ok(())
}

fn aggregate(g: &Global, bundles: &[PathBuf], out: &Path) -> Result<()> {
    let ctx = context(&g.ckks)?;
    let bs = bundles
        .iter()
        .map(|p| deserialize_bundle(&read(p)?, &ctx).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let means = aggregate_encrypted(&ctx, &bs)?;
    let head = average_heads(&bs.iter().map(|b| b.head.clone()).collect::<Vec<_>>())?;
    if means.iter().any(|m| m.chunks.len() != 1) {
        bail!("tokens span several ciphertexts; encrypted inference needs one per token");
    }
    let cts: Vec<_> = means.into_iter().flat_map(|m| m.chunks).collect();
    write(
        &out.join("aggregate.fprd"),
        &serialize_ciphertext_list(LIST_AGGREGATE_TOKENS, &cts)?,
    )?;
    write(&out.join("head.fhed"), &serialize_head(&head))?;
    eprintln!("n_agg = {} over {} clients", cts.len(), bs.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn infer(g: &Global, keys: &Path, agg: &Path, head: &Path, out: &Path, lo: f64, hi: f64) -> Result<()> {
    let ctx = context(&g.ckks)?;
    let gk = deserialize_galois_keys(&read(&keys.join("galois.fkey"))?, &ctx)?;
    let rk = deserialize_relin_key(&read(&keys.join("relin.fkey"))?, &ctx)?;
    let (kind, cts) = deserialize_ciphertext_list(&read(agg)?, &ctx)?;
    if kind != LIST_AGGREGATE_TOKENS {
        bail!("{} does not hold aggregated tokens", agg.display());
    }
    let clf = GlobalClassifier {
        head: deserialize_head(&read(head)?)?,
        poly: fit_poly_activation(lo, hi)?,
    };
    let t = Instant::now();
    let preds = cts
        .iter()
        .map(|ct| encrypted_inference(&ctx, &clf, ct, &gk, &rk))
        .collect::<fedvit::Result<Vec<_>>>()?;
    let secs = t.elapsed().as_secs_f64();
    write(out, &serialize_ciphertext_list(LIST_PREDICTIONS, &preds)?)?;
    let ms = if preds.is_empty() {
        0.0
    } else {
        secs * 1e3 / preds.len() as f64
    };
    println!("images            {}", preds.len());
    println!("ms per image      {ms:.1}");
    println!("images per second {:.1}", if ms > 0.0 { 1e3 / ms } else { 0.0 });
    println!(
        "reference         {:.1} ms per image (published, different hardware; not asserted)",
        PAPER_REFERENCE.encrypted_ms_per_image
    );
    Ok(())
}

fn decrypt(g: &Global, keys: &Path, predictions: &Path, classes: usize) -> Result<()> {
    let ctx = context(&g.ckks)?;
    let sk = deserialize_secret_key(&read(&keys.join("secret.fkey"))?, &ctx)?;
    let (_, cts) = deserialize_ciphertext_list(&read(predictions)?, &ctx)?;
    let mut out = std::io::stdout().lock();
    for (j, ct) in cts.iter().enumerate() {
        let v = decrypt_vector(&ctx, &sk, std::slice::from_ref(ct), classes)?;
        let scores: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
        writeln!(out, "{j}\t{}\t{}", argmax(&v), scores.join(","))?;
    }
    Ok(())
}

fn attack(
    g: &Global,
    lambda: f64,
    n_train: usize,
    n_eval: usize,
    report: Option<&Path>,
    dump: Option<&Path>,
) -> Result<()> {
    let ctx = context(&g.ckks)?;
    let keys = ctx.keygen(derive_seed(g.seed, 4, 1))?;
    let cfg = AttackSuiteConfig {
        lambda,
        n_train,
        n_eval,
        ..AttackSuiteConfig::default()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(g.seed, 7, 0));
    let suite = run_attack_suite(&cfg, &ctx, &keys.public, &mut rng)?;
    let mut r = suite.report(&cfg);
    r.push("setup.seed", g.seed);
    r.push("setup.ckks_profile", &g.ckks);
    if let Some(dir) = dump {
        for i in 0..suite.originals.len().min(4) {
            save_png(&suite.originals[i], &dir.join(format!("{i}_original.png")))?;
            save_png(&suite.plaintext_recons[i], &dir.join(format!("{i}_plaintext.png")))?;
            save_png(&suite.ciphertext_recons[i], &dir.join(format!("{i}_ciphertext.png")))?;
        }
    }
    eprintln!(
        "plaintext arm {:.2} dB, ciphertext arm {:.2} dB",
        suite.plaintext.mean_psnr(),
        suite.ciphertext.mean_psnr()
    );
    emit(&r, report)
}

fn round(
    g: &Global,
    clients: Option<usize>,
    config: Option<&Path>,
    out: Option<&Path>,
    report: Option<&Path>,
    timings: Option<&Path>,
) -> Result<()> {
    let mut cfg = RoundConfig::preset(if g.profile == "tiny" { "desk" } else { &g.profile })?;
    if g.profile == "tiny" {
        cfg.vit_profile = "tiny".into();
    }
    cfg.seed = g.seed;
    cfg.ckks_profile = g.ckks.clone();
    if let Some(p) = config {
        let text = String::from_utf8(read(p)?).context("round config is not UTF-8")?;
        cfg = RoundConfig::from_toml(&text, &cfg)?;
    }
    if let Some(n) = clients {
        cfg.clients = n;
    }
    let res = run_round(&cfg, out)?;
    for (stage, secs) in &res.timings {
        eprintln!("{stage:<28} {secs:>9.2} s");
    }
    emit(&res.report(&cfg), report)?;
    if let Some(p) = timings {
        write(p, res.timings_report(&cfg).render().as_bytes())?;
    }
    Ok(())
}

const CONFIGS: [(&str, &str); 4] = [
    ("encrypted_gradient", "Encrypted gradient"),
    ("plaintext_gradient", "Unencrypted gradient"),
    ("encrypted_cls", "Encrypted CLS"),
    ("plaintext_cls", "Unencrypted CLS"),
];

fn get<'a>(r: &'a Report, key: &str) -> &'a str {
    r.get(key).unwrap_or("-")
}

fn pct(r: &Report, key: &str) -> String {
    r.get_f64(key).map_or("-".into(), |v| format!("{:.2}", v * 100.0))
}

fn kb(r: &Report, key: &str) -> String {
    r.get_f64(key).map_or("-".into(), |v| format!("{:.1}", v / 1024.0))
}

fn render_tables(r: &Report, t: Option<&Report>) -> Result<String> {
    use std::fmt::Write;
    if r.get("kind") != Some("round") {
        bail!("not a round report");
    }
    let mut s = String::new();
    let clients: usize = get(r, "config.clients").parse().unwrap_or(0);

    writeln!(s, "Per-client training (epochs = {})", get(r, "config.epochs"))?;
    writeln!(
        s,
        "{:<8} {:>7} {:>12} {:>14} {:>14} {:>10}",
        "client", "images", "train acc %", "s/epoch train", "s encrypt CLS", "eval acc %"
    )?;
    for i in 1..=clients {
        let tget = |k: &str| t.and_then(|t| t.get_f64(k)).map_or("-".into(), |v| format!("{v:.2}"));
        writeln!(
            s,
            "{:<8} {:>7} {:>12} {:>14} {:>14} {:>10}",
            i,
            get(r, "config.train_per_client"),
            pct(r, &format!("client.{i}.train_accuracy")),
            tget(&format!("client.{i}.train_seconds_per_epoch")),
            tget(&format!("client.{i}.encrypt_cls_seconds")),
            pct(r, &format!("client.{i}.eval_accuracy")),
        )?;
    }

    writeln!(
        s,
        "\nCiphertext sizes (ring degree {}, fresh ciphertext {} bytes)",
        get(r, "ckks.ring_degree"),
        get(r, "ckks.fresh_ciphertext_bytes")
    )?;
    writeln!(
        s,
        "{:<10} {:>9} {:>12} {:>7} {:>13}",
        "payload", "dim", "size KB", "chunks", "published KB"
    )?;
    for (name, label, reference) in [
        ("cls", "CLS token", PAPER_REFERENCE.cls_ciphertext_kb),
        ("gradient", "Gradient", PAPER_REFERENCE.gradient_ciphertext_kb),
    ] {
        writeln!(
            s,
            "{:<10} {:>9} {:>12} {:>7} {:>13.1}",
            label,
            get(r, &format!("table2.{name}.dim")),
            get(r, &format!("table2.{name}.kb")),
            get(r, &format!("table2.{name}.chunks")),
            reference
        )?;
    }
    writeln!(
        s,
        "size ratio gradient:CLS = {}",
        r.get_f64("table2.ratio").map_or("-".into(), |v| format!("{v:.3}"))
    )?;
    if let Some(v) = r.get_f64("ledger.ratio.gradient_to_cls") {
        writeln!(
            s,
            "this round: gradient:CLS ledger bytes = {v:.3} at {} pixels per image ({} bytes total)",
            get(r, "config.pixel_dim"),
            get(r, "ledger.total_bytes")
        )?;
    }

    writeln!(s, "\nInference")?;
    writeln!(
        s,
        "{:<22} {:>10} {:>10}  {:<26} {:>14}",
        "approach", "ms/image", "img/s", "location", "KB per sample"
    )?;
    for (key, label) in CONFIGS {
        let ms = t
            .and_then(|t| t.get_f64(&format!("infer.{key}.ms_per_image")))
            .filter(|_| get(r, &format!("result.{key}.inference")) != "unavailable");
        let (ms_s, ips) = match ms {
            Some(v) if v < 1e-2 => (format!("{v:.2e}"), format!("{:.3e}", 1e3 / v)),
            Some(v) => (format!("{v:.3}"), format!("{:.1}", 1e3 / v)),
            None => ("N/A".into(), "N/A".into()),
        };
        let location = match get(r, &format!("result.{key}.inference")) {
            "server-encrypted" => "server",
            "plaintext" => "client",
            "unavailable" => "server (aggregation only)",
            other => other,
        };
        writeln!(
            s,
            "{:<22} {:>10} {:>10}  {:<26} {:>14}",
            label,
            ms_s,
            ips,
            location,
            kb(r, &format!("result.{key}.bytes_per_sample"))
        )?;
    }
    writeln!(
        s,
        "published encrypted CLS: {:.1} ms/image",
        PAPER_REFERENCE.encrypted_ms_per_image
    )?;

    writeln!(
        s,
        "\nGlobal performance over n_agg = {} aligned samples (%)",
        get(r, "n_agg")
    )?;
    writeln!(
        s,
        "{:<22} {:>9} {:>9} {:>10} {:>9} {:>11}",
        "configuration", "accuracy", "F1", "precision", "recall", "published"
    )?;
    let published = [
        PAPER_REFERENCE.encrypted_gradient_accuracy,
        PAPER_REFERENCE.plaintext_gradient_accuracy,
        PAPER_REFERENCE.encrypted_cls_accuracy,
        PAPER_REFERENCE.plaintext_cls_accuracy,
    ];
    for ((key, label), p) in CONFIGS.iter().zip(published) {
        writeln!(
            s,
            "{:<22} {:>9} {:>9} {:>10} {:>9} {:>11.2}",
            label,
            pct(r, &format!("result.{key}.accuracy")),
            pct(r, &format!("result.{key}.f1")),
            pct(r, &format!("result.{key}.precision")),
            pct(r, &format!("result.{key}.recall")),
            p * 100.0
        )?;
    }
    writeln!(
        s,
        "encrypted vs plaintext polynomial: argmax agreement {} %, max abs error {}",
        pct(r, "agreement.encrypted_vs_poly_argmax"),
        r.get_f64("agreement.max_abs_error")
            .map_or("-".into(), |v| format!("{v:.3e}"))
    )?;
    writeln!(
        s,
        "published accuracies come from full-scale runs on real data and are not reproduced here"
    )?;
    Ok(s)
}

fn report_cmd(file: &Path, timings: Option<&Path>) -> Result<()> {
    let r = Report::parse(&String::from_utf8(read(file)?).context("report is not UTF-8")?)?;
    let t = match timings {
        Some(p) => Some(Report::parse(
            &String::from_utf8(read(p)?).context("timings are not UTF-8")?,
        )?),
        None => None,
    };
    print!("{}", render_tables(&r, t.as_ref())?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Keygen { out } => keygen(g, &out),
        Command::GenData {
            count,
            client,
            from_dir,
            out,
        } => {
            if client == 0 {
                bail!("client ids start at 1");
            }
            gen_data(g, count, client, from_dir.as_deref(), &out)
        }
        Command::Train {
            data,
            out,
            epochs,
            lr,
            batch_size,
            client,
        } => {
            if client == 0 {
                bail!("client ids start at 1");
            }
            train(g, &data, &out, epochs, lr, batch_size, client)
        }
        Command::Extract {
            model,
            data,
            client,
            out,
        } => extract(&model, &data, client, &out),
        Command::Encrypt {
            keys,
            tokens,
            model,
            out,
        } => encrypt(g, &keys, &tokens, &model, &out),
        Command::Aggregate { bundles, out } => aggregate(g, &bundles, &out),
        Command::Infer {
            keys,
            aggregate,
            head,
            out,
            poly_lo,
            poly_hi,
        } => infer(g, &keys, &aggregate, &head, &out, poly_lo, poly_hi),
        Command::Decrypt {
            keys,
            predictions,
            classes,
        } => decrypt(g, &keys, &predictions, classes),
        Command::Attack {
            lambda,
            train,
            eval,
            report,
            dump_images,
        } => attack(g, lambda, train, eval, report.as_deref(), dump_images.as_deref()),
        Command::Round {
            clients,
            config,
            out,
            report,
            timings,
        } => round(
            g,
            clients,
            config.as_deref(),
            out.as_deref(),
            report.as_deref(),
            timings.as_deref(),
        ),
        Command::Report { file, timings } => report_cmd(&file, timings.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e)
            if e.downcast_ref::<std::io::Error>()
                .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe) =>
        {
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<fedvit::Error>().map_or(1, fedvit::Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
