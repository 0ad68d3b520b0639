// ibflow command-line front end: mutual-information estimation, dynamic
// information-bottleneck runs, effective-dimension tables, information-plane
// export, bidirectional-encoder comparisons, and schedule/output ablations.
//
// Conventions: every run writes run.json (fully-resolved config echo) into
// --out; exit 0 on success, 1 on runtime/numerical failure, 2 on usage
// errors. Re-running with `ibflow --config <run.json>` reproduces a run.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ibflow/ibflow.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kNatsToBits = 1.4426950408889634;  // 1 / ln 2

std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_json_file(const fs::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ibflow::Error("cannot open file for writing: " + path.string());
  out << doc.dump(2) << '\n';
}

void write_run_json(const fs::path& dir, const std::string& command,
                    const json& args) {
  json doc;
  doc["command"] = command;
  doc["args"] = args;
  doc["timestamp"] = timestamp_utc();
  write_json_file(dir / "run.json", doc);
}

fs::path prepare_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> items;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) items.push_back(item);
  return items;
}

ibflow::SpectralMeasure parse_measure(const std::string& name) {
  if (name == "l2") return ibflow::SpectralMeasure::L2Participation;
  if (name == "shannon") return ibflow::SpectralMeasure::ShannonEntropy;
  throw CLI::ValidationError("--measure must be 'l2' or 'shannon'");
}

std::string trace_csv_header() {
  return "value,seed,layer,epoch,alpha,i_xz_raw,i_zy_raw,i_xz_norm,i_zy_norm,"
         "d_eff_z,d_eff_y,loss";
}

void append_trace_csv(std::ofstream& out, const std::string& value,
                      std::uint64_t seed,
                      const std::vector<ibflow::LayerTrace>& traces) {
  for (const auto& trace : traces)
    for (const auto& r : trace.records)
      out << value << ',' << seed << ',' << trace.layer << ',' << r.epoch << ','
          << ibflow::format_double(r.alpha) << ','
          << ibflow::format_double(r.i_xz_raw) << ','
          << ibflow::format_double(r.i_zy_raw) << ','
          << ibflow::format_double(r.i_xz_norm) << ','
          << ibflow::format_double(r.i_zy_norm) << ','
          << ibflow::format_double(r.d_eff_z) << ','
          << ibflow::format_double(r.d_eff_y) << ','
          << ibflow::format_double(r.loss) << '\n';
}

// ---------------------------------------------------------------------------
// mi-estimate

struct MiEstimateArgs {
  std::string input;
  std::size_t layer = 0;
  std::string target = "xz";
  std::string synthetic;
  double rho = 0.9;
  std::size_t n = 20000;
  std::size_t d = 1;
  std::size_t hidden = 128;
  double lr = 1e-3;
  std::size_t steps = 2000;
  std::size_t batch = 512;
  double ema = 0.99;
  std::uint64_t seed = 0;
  bool bits = false;
  bool relu = false;
  std::string out = ".";

  json to_json() const {
    return json{{"input", input},   {"layer", layer}, {"target", target},
                {"synthetic", synthetic}, {"rho", rho}, {"n", n},
                {"d", d},           {"hidden", hidden}, {"lr", lr},
                {"steps", steps},   {"batch", batch}, {"ema", ema},
                {"seed", seed},     {"bits", bits},   {"relu", relu},
                {"out", out}};
  }
};

void register_mi_estimate(CLI::App& app, MiEstimateArgs& a, int& exit_code) {
  auto* cmd = app.add_subcommand(
      "mi-estimate", "Train a neural critic and report the DV estimate");
  cmd->add_option("--input", a.input,
                  "Representation dump manifest (alternative to --synthetic)");
  cmd->add_option("--layer", a.layer, "Layer index for manifest input");
  cmd->add_option("--target", a.target, "Pair for manifest input: xz or zy")
      ->check(CLI::IsMember({"xz", "zy"}));
  cmd->add_option("--synthetic", a.synthetic, "Synthetic source: gaussian")
      ->check(CLI::IsMember({"gaussian"}));
  cmd->add_option("--rho", a.rho, "Gaussian correlation, |rho| < 1");
  cmd->add_option("--n", a.n, "Sample count");
  cmd->add_option("--d", a.d, "Coordinate pairs for the gaussian source");
  cmd->add_option("--hidden", a.hidden, "Critic hidden width");
  cmd->add_option("--lr", a.lr, "Adam learning rate");
  cmd->add_option("--steps", a.steps, "Training steps");
  cmd->add_option("--batch", a.batch, "Mini-batch size");
  cmd->add_option("--ema", a.ema, "EMA rate for the denominator gradient");
  cmd->add_option("--seed", a.seed, "RNG seed");
  cmd->add_flag("--bits", a.bits, "Also report the estimate in bits");
  cmd->add_flag("--relu", a.relu, "Use the relu critic activation");
  cmd->add_option("--out", a.out, "Output directory");

  cmd->callback([&]() {
    if (a.synthetic.empty() == a.input.empty())
      throw CLI::ValidationError(
          "mi-estimate: exactly one of --input or --synthetic is required");
    if (a.synthetic == "gaussian" && std::abs(a.rho) >= 1.0)
      throw CLI::ValidationError("mi-estimate: |rho| must be < 1");

    const auto dir = prepare_out_dir(a.out);
    ibflow::MIPairBatch batch;
    if (!a.synthetic.empty()) {
      batch = ibflow::gen_gaussian_pair(a.n, a.d, a.rho, a.seed);
    } else {
      const auto reps = ibflow::load_representation_dump(a.input);
      if (a.layer >= reps.layers.size())
        throw ibflow::Error("layer index out of range: " +
                            std::to_string(a.layer));
      batch = a.target == "xz"
                  ? ibflow::MIPairBatch{reps.x, reps.layers[a.layer]}
                  : ibflow::MIPairBatch{reps.layers[a.layer], reps.y};
    }

    ibflow::MICriticConfig cfg;
    cfg.hidden = a.hidden;
    cfg.lr = a.lr;
    cfg.steps = a.steps;
    cfg.batch_size = a.batch;
    cfg.ema_rate = a.ema;
    cfg.seed = a.seed;
    cfg.activation =
        a.relu ? ibflow::Activation::Relu : ibflow::Activation::Softplus;
    const auto result = ibflow::train_mi_critic(batch, cfg);

    {
      std::ofstream trace(dir / "mi_trace.csv", std::ios::binary);
      trace << "step,estimate_nats\n";
      for (std::size_t i = 0; i < result.step_estimates.size(); ++i)
        trace << i << ',' << ibflow::format_double(result.step_estimates[i])
              << '\n';
    }

    json mi;
    mi["estimate_nats"] = result.estimate.value_nats;
    if (a.bits) mi["estimate_bits"] = result.estimate.value_nats * kNatsToBits;
    mi["n_joint"] = result.estimate.n_joint;
    mi["n_marginal"] = result.estimate.n_marginal;
    if (std::isfinite(batch.true_mi)) mi["true_mi_nats"] = batch.true_mi;
    mi["trace"] = "mi_trace.csv";
    mi["config"] = a.to_json();
    write_json_file(dir / "mi.json", mi);
    write_run_json(dir, "mi-estimate", a.to_json());
    std::printf("mi-estimate: %.6f nats (n=%zu)\n", result.estimate.value_nats,
                result.estimate.n_joint);
    exit_code = 0;
  });
}

// ---------------------------------------------------------------------------
// effdim

struct EffdimArgs {
  std::string input;
  std::string synthetic;
  std::size_t n = 10000;
  std::size_t d = 8;
  std::uint64_t seed = 0;
  std::string measure = "l2";
  std::string out = ".";

  json to_json() const {
    return json{{"input", input}, {"synthetic", synthetic}, {"n", n},
                {"d", d},         {"seed", seed},           {"measure", measure},
                {"out", out}};
  }
};

void register_effdim(CLI::App& app, EffdimArgs& a, int& exit_code) {
  auto* cmd = app.add_subcommand(
      "effdim", "Effective dimensionality of representations");
  cmd->add_option("--input", a.input, "Representation dump manifest");
  cmd->add_option("--synthetic", a.synthetic, "Synthetic source: isotropic")
      ->check(CLI::IsMember({"isotropic"}));
  cmd->add_option("--n", a.n, "Sample count for the synthetic source");
  cmd->add_option("--d", a.d, "Dimension for the synthetic source");
  cmd->add_option("--seed", a.seed, "RNG seed");
  cmd->add_option("--measure", a.measure, "Spectral measure: l2 or shannon")
      ->check(CLI::IsMember({"l2", "shannon"}));
  cmd->add_option("--out", a.out, "Output directory");

  cmd->callback([&]() {
    if (a.synthetic.empty() == a.input.empty())
      throw CLI::ValidationError(
          "effdim: exactly one of --input or --synthetic is required");
    const auto dir = prepare_out_dir(a.out);
    const auto measure = parse_measure(a.measure);

    struct Row {
      std::string name;
      std::size_t rows, cols;
      double value;
    };
    std::vector<Row> table;
    if (!a.synthetic.empty()) {
      ibflow::RandomSource rng(a.seed);
      ibflow::SampleMatrix x(a.n, a.d);
      for (auto& v : x.data) v = rng.gaussian();
      table.push_back({"isotropic", x.n_rows, x.n_cols,
                       ibflow::d_eff_of_data(x, measure)});
    } else {
      const auto reps = ibflow::load_representation_dump(a.input);
      table.push_back({"x", reps.x.n_rows, reps.x.n_cols,
                       ibflow::d_eff_of_data(reps.x, measure)});
      for (std::size_t l = 0; l < reps.layers.size(); ++l)
        table.push_back({"layer_" + std::to_string(l), reps.layers[l].n_rows,
                         reps.layers[l].n_cols,
                         ibflow::d_eff_of_data(reps.layers[l], measure)});
      table.push_back({"y", reps.y.n_rows, reps.y.n_cols,
                       ibflow::d_eff_of_data(reps.y, measure)});
    }

    {
      std::ofstream csv(dir / "effdim.csv", std::ios::binary);
      csv << "name,rows,cols,d_eff\n";
      for (const auto& row : table)
        csv << row.name << ',' << row.rows << ',' << row.cols << ','
            << ibflow::format_double(row.value) << '\n';
    }
    json doc;
    doc["measure"] = a.measure;
    doc["table"] = json::array();
    for (const auto& row : table)
      doc["table"].push_back(json{{"name", row.name},
                                  {"rows", row.rows},
                                  {"cols", row.cols},
                                  {"d_eff", row.value}});
    write_json_file(dir / "effdim.json", doc);
    write_run_json(dir, "effdim", a.to_json());
    for (const auto& row : table)
      std::printf("effdim %-10s %.6f\n", row.name.c_str(), row.value);
    exit_code = 0;
  });
}

// ---------------------------------------------------------------------------
// flownib run

struct FlownibArgs {
  std::string input;
  std::string synthetic;
  std::size_t n = 4000;
  std::size_t epochs = 10;
  std::size_t steps_per_epoch = 50;
  std::size_t batch = 256;
  std::size_t hidden = 128;
  double lr = 1e-3;
  double delta = 1e-3;
  double alpha0 = 1.0;
  bool alpha_per_epoch = false;
  std::string measure = "l2";
  std::uint64_t seed = 0;
  bool decoupled = false;
  bool train_encoder = false;
  std::size_t encoder_dim = 2;
  double encoder_lr = 1.5e-3;
  double encoder_noise = 0.45;
  bool relu = false;
  std::string out = ".";

  json to_json() const {
    return json{{"input", input},
                {"synthetic", synthetic},
                {"n", n},
                {"epochs", epochs},
                {"steps-per-epoch", steps_per_epoch},
                {"batch", batch},
                {"hidden", hidden},
                {"lr", lr},
                {"delta", delta},
                {"alpha0", alpha0},
                {"alpha-per-epoch", alpha_per_epoch},
                {"measure", measure},
                {"seed", seed},
                {"decoupled", decoupled},
                {"train-encoder", train_encoder},
                {"encoder-dim", encoder_dim},
                {"encoder-lr", encoder_lr},
                {"encoder-noise", encoder_noise},
                {"relu", relu},
                {"out", out}};
  }

  ibflow::FlowNIBConfig to_config() const {
    ibflow::FlowNIBConfig cfg;
    cfg.epochs = epochs;
    cfg.steps_per_epoch = steps_per_epoch;
    cfg.batch_size = batch;
    cfg.hidden = hidden;
    cfg.lr = lr;
    cfg.schedule.alpha0 = alpha0;
    cfg.schedule.delta = delta;
    cfg.alpha_per_epoch = alpha_per_epoch;
    cfg.measure = parse_measure(measure);
    cfg.seed = seed;
    cfg.decoupled = decoupled;
    cfg.train_encoder = train_encoder;
    cfg.encoder_dim = encoder_dim;
    cfg.encoder_lr = encoder_lr;
    cfg.encoder_noise = encoder_noise;
    cfg.activation =
        relu ? ibflow::Activation::Relu : ibflow::Activation::Softplus;
    return cfg;
  }
};

void add_flownib_options(CLI::App* cmd, FlownibArgs& a) {
  cmd->add_option("--input", a.input, "Representation dump manifest");
  cmd->add_option("--synthetic", a.synthetic,
                  "Synthetic source: correlated or anisotropic")
      ->check(CLI::IsMember({"correlated", "anisotropic"}));
  cmd->add_option("--n", a.n, "Sample count for synthetic sources");
  cmd->add_option("--epochs", a.epochs, "Epochs");
  cmd->add_option("--steps-per-epoch", a.steps_per_epoch, "Steps per epoch");
  cmd->add_option("--batch", a.batch, "Mini-batch size");
  cmd->add_option("--hidden", a.hidden, "Critic hidden width");
  cmd->add_option("--lr", a.lr, "Critic Adam learning rate");
  cmd->add_option("--delta", a.delta, "Alpha decrement per step (or epoch)");
  cmd->add_option("--alpha0", a.alpha0, "Initial alpha");
  cmd->add_flag("--alpha-per-epoch", a.alpha_per_epoch,
                "Decrement alpha per epoch instead of per step");
  cmd->add_option("--measure", a.measure, "Spectral measure: l2 or shannon")
      ->check(CLI::IsMember({"l2", "shannon"}));
  cmd->add_option("--seed", a.seed, "RNG seed");
  cmd->add_flag("--decoupled", a.decoupled,
                "Train each critic on its unweighted DV objective");
  cmd->add_flag("--train-encoder", a.train_encoder,
                "Prepend a trainable linear encoder per layer");
  cmd->add_option("--encoder-dim", a.encoder_dim, "Encoder output dimension");
  cmd->add_option("--encoder-lr", a.encoder_lr, "Encoder learning rate");
  cmd->add_option("--encoder-noise", a.encoder_noise,
                  "Encoder observation noise stddev");
  cmd->add_flag("--relu", a.relu, "Use the relu critic activation");
  cmd->add_option("--out", a.out, "Output directory");
}

ibflow::RepresentationSet flownib_input(const FlownibArgs& a) {
  if (a.synthetic == "correlated")
    return ibflow::gen_correlated_benchmark(a.n, 2, 0.9, 0.1, a.seed);
  if (a.synthetic == "anisotropic")
    return ibflow::gen_anisotropic_regression(a.n, {1.4, 0.9, 0.5}, 0.1,
                                              a.seed);
  return ibflow::load_representation_dump(a.input);
}

void register_flownib(CLI::App& app, FlownibArgs& a, int& exit_code) {
  auto* group =
      app.add_subcommand("flownib", "Dynamic IB training over layers");
  group->require_subcommand(1);
  auto* cmd = group->add_subcommand("run", "Run the per-layer critic training");
  add_flownib_options(cmd, a);

  cmd->callback([&]() {
    if (a.synthetic.empty() == a.input.empty())
      throw CLI::ValidationError(
          "flownib run: exactly one of --input or --synthetic is required");
    const auto dir = prepare_out_dir(a.out);
    const auto reps = flownib_input(a);
    const auto traces =
        ibflow::run_flownib(reps, a.to_config(), ibflow::worker_limit());
    ibflow::write_trace_jsonl((dir / "trace.jsonl").string(), traces);
    write_run_json(dir, "flownib run", a.to_json());
    std::printf("flownib run: %zu layers x %zu epochs -> %s\n", traces.size(),
                a.epochs, (dir / "trace.jsonl").string().c_str());
    exit_code = 0;
  });
}

// ---------------------------------------------------------------------------
// infoplane export

struct InfoplaneArgs {
  std::string trace = "trace.jsonl";
  double offset = 0.05;
  bool normalized = false;
  std::size_t window = 5;
  double tol = 1e-4;
  bool bits = false;
  bool harmonic_mic = false;
  std::string out = ".";

  json to_json() const {
    return json{{"trace", trace},   {"offset", offset},
                {"normalized", normalized}, {"window", window},
                {"tol", tol},       {"bits", bits},
                {"harmonic-mic", harmonic_mic}, {"out", out}};
  }
};

void register_infoplane(CLI::App& app, InfoplaneArgs& a, int& exit_code) {
  auto* group = app.add_subcommand("infoplane", "Information-plane tables");
  group->require_subcommand(1);
  auto* cmd = group->add_subcommand("export", "Flatten traces to plane tables");
  cmd->add_option("--trace", a.trace, "trace.jsonl produced by flownib run");
  cmd->add_option("--offset", a.offset, "Per-layer x offset");
  cmd->add_flag("--normalized", a.normalized,
                "Export dimension-normalized estimates");
  cmd->add_option("--window", a.window, "Phase-detection window (epochs)");
  cmd->add_option("--tol", a.tol, "Phase slope tolerance (nats/epoch)");
  cmd->add_flag("--bits", a.bits, "Export coordinates in bits");
  cmd->add_flag("--harmonic-mic", a.harmonic_mic,
                "Score MIC by harmonic mean instead of min");
  cmd->add_option("--out", a.out, "Output directory");

  cmd->callback([&]() {
    const auto dir = prepare_out_dir(a.out);
    const auto traces = ibflow::read_trace_jsonl(a.trace);
    auto points = ibflow::export_plane(traces, a.offset, a.normalized);
    if (a.bits)
      for (auto& p : points) {
        p.x *= kNatsToBits;
        p.y *= kNatsToBits;
      }

    // phase label per (layer, epoch); traces too short stay unlabeled
    std::map<std::pair<std::size_t, std::size_t>, const char*> phases;
    for (const auto& trace : traces) {
      if (a.window >= 1 && trace.records.size() >= 2 * a.window) {
        for (const auto& range : ibflow::detect_phases(trace, a.window, a.tol))
          for (std::size_t e = range.begin; e < range.end; ++e)
            phases[{trace.layer, trace.records[e].epoch}] =
                ibflow::phase_name(range.label);
      } else {
        for (const auto& rec : trace.records)
          phases[{trace.layer, rec.epoch}] = "unlabeled";
      }
    }

    {
      std::ofstream csv(dir / "plane.csv", std::ios::binary);
      csv << "layer,epoch,x,y,alpha,phase\n";
      for (const auto& p : points)
        csv << p.layer << ',' << p.epoch << ',' << ibflow::format_double(p.x)
            << ',' << ibflow::format_double(p.y) << ','
            << ibflow::format_double(p.alpha) << ','
            << phases[{p.layer, p.epoch}] << '\n';
    }
    {
      std::ofstream jsonl(dir / "plane.jsonl", std::ios::binary);
      for (const auto& p : points)
        jsonl << json{{"layer", p.layer},
                      {"epoch", p.epoch},
                      {"x", p.x},
                      {"y", p.y},
                      {"alpha", p.alpha},
                      {"phase", phases[{p.layer, p.epoch}]}}
                     .dump()
              << '\n';
    }
    {
      const auto mic = ibflow::mic_summary(traces, a.harmonic_mic);
      std::ofstream csv(dir / "mic.csv", std::ios::binary);
      csv << "layer,final_i_xz_norm,final_i_zy_norm,mic_score\n";
      for (const auto& r : mic)
        csv << r.layer << ',' << ibflow::format_double(r.final_i_xz_norm) << ','
            << ibflow::format_double(r.final_i_zy_norm) << ','
            << ibflow::format_double(r.mic_score) << '\n';
    }
    write_run_json(dir, "infoplane export", a.to_json());
    std::printf("infoplane export: %zu points -> %s\n", points.size(),
                (dir / "plane.csv").string().c_str());
    exit_code = 0;
  });
}

// ---------------------------------------------------------------------------
// compare-bidir

struct CompareBidirArgs {
  std::size_t seeds = 20;
  std::size_t n = 5000;
  std::size_t len = 4;
  int vocab = 4;
  std::size_t embed_dim = 8;
  std::size_t rep_dim = 4;
  double gamma = 0.5;
  std::size_t hidden = 64;
  double lr = 3e-3;
  std::size_t steps = 900;
  std::size_t batch = 256;
  double tolerance = 0.05;
  std::uint64_t seed = 0;
  std::string out = ".";

  json to_json() const {
    return json{{"seeds", seeds},     {"n", n},
                {"len", len},         {"vocab", vocab},
                {"embed-dim", embed_dim}, {"rep-dim", rep_dim},
                {"gamma", gamma},     {"hidden", hidden},
                {"lr", lr},           {"steps", steps},
                {"batch", batch},     {"tolerance", tolerance},
                {"seed", seed},       {"out", out}};
  }
};

void register_compare_bidir(CLI::App& app, CompareBidirArgs& a,
                            int& exit_code) {
  auto* cmd = app.add_subcommand(
      "compare-bidir",
      "Unidirectional vs bidirectional encoders: MI and d_eff per seed");
  cmd->add_option("--seeds", a.seeds, "Number of seeds");
  cmd->add_option("--n", a.n, "Samples per seed");
  cmd->add_option("--len", a.len, "Sequence length");
  cmd->add_option("--vocab", a.vocab, "Vocabulary size");
  cmd->add_option("--embed-dim", a.embed_dim, "Embedding dimension");
  cmd->add_option("--rep-dim", a.rep_dim, "Per-direction code dimension");
  cmd->add_option("--gamma", a.gamma, "Positional discount");
  cmd->add_option("--hidden", a.hidden, "Critic hidden width");
  cmd->add_option("--lr", a.lr, "Critic learning rate");
  cmd->add_option("--steps", a.steps, "Critic training steps");
  cmd->add_option("--batch", a.batch, "Mini-batch size");
  cmd->add_option("--tolerance", a.tolerance, "MI ordering tolerance (nats)");
  cmd->add_option("--seed", a.seed, "Base seed");
  cmd->add_option("--out", a.out, "Output directory");

  cmd->callback([&]() {
    if (a.seeds < 1) throw CLI::ValidationError("compare-bidir: --seeds >= 1");
    const auto dir = prepare_out_dir(a.out);

    ibflow::BidirCompareConfig cfg;
    cfg.n = a.n;
    cfg.len = a.len;
    cfg.vocab = a.vocab;
    cfg.embed_dim = a.embed_dim;
    cfg.rep_dim = a.rep_dim;
    cfg.gamma = a.gamma;
    cfg.hidden = a.hidden;
    cfg.lr = a.lr;
    cfg.steps = a.steps;
    cfg.batch_size = a.batch;
    cfg.mi_tolerance = a.tolerance;

    std::vector<ibflow::BidirSeedResult> results(a.seeds);
    ibflow::parallel_for(a.seeds, ibflow::worker_limit(), [&](std::size_t k) {
      results[k] =
          ibflow::compare_bidir_seed(cfg, ibflow::derive_seed(a.seed, 100 + k));
    });

    std::size_t pass_x = 0, pass_y = 0, pass_d = 0;
    {
      std::ofstream csv(dir / "compare_bidir.csv", std::ios::binary);
      csv << "seed,i_x_uni,i_x_bi,i_zy_uni,i_zy_bi,d_eff_uni,d_eff_bi,"
             "mi_x_ok,mi_y_ok,d_eff_ok\n";
      for (const auto& r : results) {
        pass_x += r.mi_x_ok;
        pass_y += r.mi_y_ok;
        pass_d += r.d_eff_ok;
        csv << r.seed << ',' << ibflow::format_double(r.i_x_uni) << ','
            << ibflow::format_double(r.i_x_bi) << ','
            << ibflow::format_double(r.i_zy_uni) << ','
            << ibflow::format_double(r.i_zy_bi) << ','
            << ibflow::format_double(r.d_eff_uni) << ','
            << ibflow::format_double(r.d_eff_bi) << ',' << r.mi_x_ok << ','
            << r.mi_y_ok << ',' << r.d_eff_ok << '\n';
      }
    }
    json summary;
    summary["seeds"] = a.seeds;
    summary["pass_rate_mi_x"] = double(pass_x) / double(a.seeds);
    summary["pass_rate_mi_y"] = double(pass_y) / double(a.seeds);
    summary["pass_rate_d_eff"] = double(pass_d) / double(a.seeds);
    summary["pass_rate"] =
        double(std::min({pass_x, pass_y, pass_d})) / double(a.seeds);
    write_json_file(dir / "summary.json", summary);
    write_run_json(dir, "compare-bidir", a.to_json());
    std::printf(
        "compare-bidir: mi_x %.2f mi_y %.2f d_eff %.2f over %zu seeds\n",
        summary["pass_rate_mi_x"].get<double>(),
        summary["pass_rate_mi_y"].get<double>(),
        summary["pass_rate_d_eff"].get<double>(), a.seeds);
    exit_code = 0;
  });
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  std::string param = "delta";
  std::string values;
  std::size_t seeds = 1;
  FlownibArgs run;  // reused flownib knobs

  json to_json() const {
    json j = run.to_json();
    j["param"] = param;
    j["values"] = values;
    j["seeds"] = seeds;
    return j;
  }
};

void register_ablate(CLI::App& app, AblateArgs& a, int& exit_code) {
  auto* cmd = app.add_subcommand(
      "ablate", "Fan out flownib runs over a parameter (delta or ydim)");
  cmd->add_option("--param", a.param,
                  "Parameter to sweep: delta, or ydim (regression targets "
                  "around a fixed 8-dim input; values must span below and "
                  "above 8)")
      ->check(CLI::IsMember({"delta", "ydim"}));
  cmd->add_option("--values", a.values, "Comma-separated values")->required();
  cmd->add_option("--seeds", a.seeds, "Seeds per value");
  add_flownib_options(cmd, a.run);

  cmd->callback([&]() {
    const auto dir = prepare_out_dir(a.run.out);
    const auto tokens = split_csv_list(a.values);
    if (a.param == "delta" && tokens.size() < 2)
      throw CLI::ValidationError("ablate: need at least 2 delta values");
    if (a.param == "ydim" && tokens.size() < 3)
      throw CLI::ValidationError("ablate: need at least 3 ydim values");

    std::ofstream combined(dir / "combined.csv", std::ios::binary);
    combined << trace_csv_header() << '\n';

    if (a.param == "delta") {
      if (a.run.synthetic.empty() && a.run.input.empty())
        a.run.synthetic = "anisotropic";
      std::vector<double> deltas;
      for (const auto& t : tokens) deltas.push_back(std::stod(t));

      struct Item {
        std::size_t value_idx;
        std::size_t seed_idx;
      };
      std::vector<Item> items;
      for (std::size_t v = 0; v < tokens.size(); ++v)
        for (std::size_t s = 0; s < a.seeds; ++s) items.push_back({v, s});
      std::vector<std::vector<ibflow::LayerTrace>> traces(items.size());
      ibflow::parallel_for(
          items.size(), ibflow::worker_limit(), [&](std::size_t i) {
            FlownibArgs run = a.run;
            run.delta = deltas[items[i].value_idx];
            run.seed = ibflow::derive_seed(a.run.seed, items[i].seed_idx);
            const auto reps = flownib_input(run);
            traces[i] = ibflow::run_flownib(reps, run.to_config());
          });
      for (std::size_t i = 0; i < items.size(); ++i) {
        const auto& token = tokens[items[i].value_idx];
        const std::string name =
            a.seeds > 1 ? "trace_delta_" + token + "_s" +
                              std::to_string(items[i].seed_idx) + ".jsonl"
                        : "trace_delta_" + token + ".jsonl";
        ibflow::write_trace_jsonl((dir / name).string(), traces[i]);
        append_trace_csv(combined, token,
                         ibflow::derive_seed(a.run.seed, items[i].seed_idx),
                         traces[i]);
      }
    } else {
      std::vector<std::size_t> dims;
      for (const auto& t : tokens) dims.push_back(std::stoul(t));
      ibflow::YdimAblationConfig cfg;
      cfg.n = a.run.n;
      cfg.d_x = 8;
      cfg.layer_dims = {a.run.encoder_dim};
      cfg.seed = a.run.seed;
      cfg.run = a.run.to_config();
      cfg.run.decoupled = true;
      const auto results = ibflow::ydim_ablation(cfg, dims);
      for (std::size_t i = 0; i < results.size(); ++i) {
        const std::string name = "trace_ydim_" + tokens[i] + ".jsonl";
        ibflow::write_trace_jsonl((dir / name).string(), results[i].traces);
        append_trace_csv(combined, tokens[i], a.run.seed, results[i].traces);
      }
    }
    write_run_json(dir, "ablate", a.to_json());
    std::printf("ablate %s: %zu values -> %s\n", a.param.c_str(), tokens.size(),
                (dir / "combined.csv").string().c_str());
    exit_code = 0;
  });
}

// ---------------------------------------------------------------------------
// --config reload

std::vector<std::string> argv_from_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ibflow::Error("cannot open config: " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ibflow::Error("invalid config " + path + ": " + e.what());
  }
  if (!doc.contains("command") || !doc.contains("args"))
    throw ibflow::Error("config " + path + " missing 'command' or 'args'");

  std::vector<std::string> args;
  std::stringstream cmd(doc["command"].get<std::string>());
  std::string word;
  while (cmd >> word) args.push_back(word);
  for (const auto& [key, value] : doc["args"].items()) {
    if (value.is_boolean()) {
      if (value.get<bool>()) args.push_back("--" + key);
    } else if (value.is_string()) {
      if (!value.get<std::string>().empty()) {
        args.push_back("--" + key);
        args.push_back(value.get<std::string>());
      }
    } else {
      args.push_back("--" + key);
      args.push_back(value.dump());
    }
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> raw(argv + 1, argv + argc);
  try {
    if (!raw.empty() && raw[0] == "--config") {
      if (raw.size() != 2) {
        std::fprintf(stderr, "usage: ibflow --config <run.json>\n");
        return 2;
      }
      raw = argv_from_config(raw[1]);
    }
  } catch (const ibflow::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }

  CLI::App app{
      "ibflow: neural mutual-information estimation, dynamic "
      "information-bottleneck runs, and information-plane export"};
  app.require_subcommand(1);

  int exit_code = 1;
  MiEstimateArgs mi_args;
  EffdimArgs effdim_args;
  FlownibArgs flownib_args;
  InfoplaneArgs infoplane_args;
  CompareBidirArgs compare_args;
  AblateArgs ablate_args;
  register_mi_estimate(app, mi_args, exit_code);
  register_effdim(app, effdim_args, exit_code);
  register_flownib(app, flownib_args, exit_code);
  register_infoplane(app, infoplane_args, exit_code);
  register_compare_bidir(app, compare_args, exit_code);
  register_ablate(app, ablate_args, exit_code);

  std::vector<const char*> cargv;
  cargv.push_back(argv[0]);
  for (const auto& s : raw) cargv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(cargv.size()), cargv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const ibflow::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return exit_code;
}
