#include "langdepth/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "langdepth/depth_data.hpp"
#include "langdepth/embedding_store.hpp"
#include "langdepth/errors.hpp"
#include "langdepth/harness.hpp"
#include "langdepth/hint_renderer.hpp"
#include "langdepth/l2d_model.hpp"
#include "langdepth/lookup_table.hpp"
#include "langdepth/metrics.hpp"

namespace langdepth::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::uint64_t default_seed() {
  if (const char* env = std::getenv(kSeedEnvVar)) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw Error(std::string(kSeedEnvVar) + " is not an unsigned integer: '" + env + "'");
    }
  }
  return 0;
}

void require_output_dir(const fs::path& path) {
  const auto parent = path.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw Error("output directory does not exist: " + parent.string());
  }
}

struct BinningFlags {
  double min_depth = 0.0;
  double max_depth = 10.0;
  std::size_t bins = 256;

  void add(CLI::App* app) {
    app->add_option("--min-depth", min_depth, "Lower edge of the depth bins (m)")->capture_default_str();
    app->add_option("--max-depth", max_depth, "Upper edge of the depth bins (m)")->capture_default_str();
    app->add_option("--bins", bins, "Number of depth bins")->capture_default_str();
  }
  BinningSpec spec() const {
    BinningSpec s{min_depth, max_depth, bins};
    s.validate();
    return s;
  }
  json to_json() const { return {{"min_depth", min_depth}, {"max_depth", max_depth}, {"bins", bins}}; }
};

void emit_report(const json& report, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << report.dump(2) << '\n';
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write report " + path);
  f << report.dump(2) << '\n';
}

// ---------------------------------------------------------------- build-dataset

struct BuildDatasetArgs {
  std::string manifest;
  std::string out;
  bool loo = false;
  std::string vocab;
  std::string pooling = "pixel";
  BinningFlags binning;
  std::string report;
};

void build_dataset(const BuildDatasetArgs& a, std::ostream& out) {
  require_output_dir(a.out);
  const auto spec = a.binning.spec();
  if (a.loo && a.vocab.empty()) throw Error("--loo requires --vocab");

  const auto manifest = load_manifest(a.manifest);
  for (const auto& p : manifest) {
    if (!fs::is_regular_file(p)) throw Error("frame listed in manifest not found: " + p.string());
  }
  ExtractionReport extraction;
  auto records = build_inst_dataset(manifest, spec, &extraction);

  json report{{"command", "build-dataset"},
              {"parameters",
               {{"manifest", a.manifest},
                {"out", a.out},
                {"preparation", a.loo ? "loo" : "inst"},
                {"vocab", a.vocab},
                {"pooling", a.pooling},
                {"binning", a.binning.to_json()}}},
              {"frames", extraction.frames},
              {"instances", records.size()},
              {"dropped_instances", extraction.dropped_instances}};

  if (a.loo) {
    const auto vocabulary = load_vocabulary(a.vocab);
    ClassPooling pooling;
    if (a.pooling == "pixel") {
      pooling = ClassPooling::PixelWeighted;
    } else if (a.pooling == "instance") {
      pooling = ClassPooling::InstanceMean;
    } else {
      throw Error("--pooling must be pixel or instance");
    }
    AggregationReport agg;
    records = aggregate_loo(records, vocabulary, spec, pooling, &agg);
    report["missing_labels"] = agg.missing_labels;
  }
  save_records(records, a.out);
  report["records"] = records.size();
  emit_report(report, a.report, out);
}

// ---------------------------------------------------------------- training flags

struct TrainingArgs {
  std::string dataset;
  std::string embeddings;
  std::optional<std::size_t> random_dim;
  std::string save_embeddings;
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> init_seed;
  std::optional<std::uint64_t> shuffle_seed;
  std::string mode = "logmean";
  std::vector<std::size_t> hidden;
  std::size_t epochs = 100;
  std::optional<std::size_t> batch_size;
  std::string preparation = "inst";
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::string silog_form = "printed";
  std::string kl_direction = "gt-to-pred";
  BinningFlags binning;
  std::string report;

  void add(CLI::App* app) {
    app->add_option("--dataset", dataset, "JSON-lines dataset")->required()->check(CLI::ExistingFile);
    auto* emb = app->add_option("--embeddings", embeddings, "DHEMB embedding file")->check(CLI::ExistingFile);
    auto* rnd = app->add_option("--random-dim", random_dim, "Use uniform [0,1) control embeddings of this dim");
    emb->excludes(rnd);
    app->add_option("--save-embeddings", save_embeddings, "Write the control embeddings used (with --random-dim)");
    app->add_option("--seed", seed, std::string("Base seed (default from ") + kSeedEnvVar + ", else 0)");
    app->add_option("--init-seed", init_seed, "Model initialization seed (default: --seed)");
    app->add_option("--shuffle-seed", shuffle_seed, "Batch shuffling seed (default: --seed)");
    app->add_option("--mode", mode, "logmean or class")->capture_default_str();
    app->add_option("--hidden", hidden, "Hidden layer widths (default 100 / 100,50)")->delimiter(',');
    app->add_option("--epochs", epochs)->capture_default_str();
    app->add_option("--batch-size", batch_size, "Default 1000 (inst) or min(classes-1, 100) (loo)");
    app->add_option("--preparation", preparation, "inst or loo (selects the default batch size)")->capture_default_str();
    app->add_option("--lr", lr)->capture_default_str();
    app->add_option("--beta1", beta1)->capture_default_str();
    app->add_option("--beta2", beta2)->capture_default_str();
    app->add_option("--eps", eps)->capture_default_str();
    app->add_option("--silog-form", silog_form, "printed or variance")->capture_default_str();
    app->add_option("--kl-direction", kl_direction, "gt-to-pred or as-written")->capture_default_str();
    binning.add(app);
    app->add_option("--report", report, "Run report path (default: stdout)");
  }

  L2DConfig config(std::size_t input_dim) const {
    const L2DMode m = parse_mode(mode);
    L2DConfig c = m == L2DMode::LogMean ? L2DConfig::log_mean(input_dim)
                                        : L2DConfig::classification(input_dim, binning.bins);
    if (!hidden.empty()) c.hidden_dims = hidden;
    c.validate();
    return c;
  }

  TrainSpec train_spec(std::size_t n_records) const {
    TrainSpec s;
    if (preparation == "inst") {
      s = TrainSpec::inst_defaults();
    } else if (preparation == "loo") {
      s = TrainSpec::loo_defaults(n_records);
    } else {
      throw Error("--preparation must be inst or loo");
    }
    if (batch_size) s.batch_size = *batch_size;
    s.epochs = epochs;
    s.init_seed = {init_seed.value_or(seed)};
    s.shuffle_seed = {shuffle_seed.value_or(seed)};
    s.adam = {lr, beta1, beta2, eps};
    if (silog_form == "printed") {
      s.silog_form = SilogForm::AsPrinted;
    } else if (silog_form == "variance") {
      s.silog_form = SilogForm::Variance;
    } else {
      throw Error("--silog-form must be printed or variance");
    }
    if (kl_direction == "gt-to-pred") {
      s.kl_direction = KlDirection::GtToPred;
    } else if (kl_direction == "as-written") {
      s.kl_direction = KlDirection::AsWritten;
    } else {
      throw Error("--kl-direction must be gt-to-pred or as-written");
    }
    s.validate();
    return s;
  }

  EmbeddingStore store(const std::vector<DepthRecord>& records) const {
    if (embeddings.empty() == !random_dim.has_value()) {
      throw Error("exactly one of --embeddings or --random-dim is required");
    }
    if (!embeddings.empty()) return load_store(embeddings);
    std::vector<std::string> labels;
    std::set<std::string> seen;
    for (const auto& r : records) {
      if (seen.insert(r.label).second) labels.push_back(r.label);
    }
    auto s = random_store(labels, *random_dim, {seed});
    if (!save_embeddings.empty()) save_store(s, save_embeddings);
    return s;
  }

  json echo(const L2DConfig& config, const TrainSpec& spec) const {
    return {{"dataset", dataset},
            {"embeddings", embeddings},
            {"control_mode", random_dim ? "random" : "embeddings"},
            {"random_dim", random_dim ? json(*random_dim) : json(nullptr)},
            {"mode", to_string(config.mode)},
            {"input_dim", config.input_dim},
            {"hidden_dims", config.hidden_dims},
            {"output_dim", config.output_dim()},
            {"preparation", preparation},
            {"epochs", spec.epochs},
            {"batch_size", spec.batch_size},
            {"optimizer",
             {{"name", "adam"}, {"lr", spec.adam.lr}, {"beta1", spec.adam.beta1},
              {"beta2", spec.adam.beta2}, {"eps", spec.adam.eps}}},
            {"silog_form", silog_form},
            {"kl_direction", kl_direction},
            {"binning", binning.to_json()}};
  }

  json seeds(const TrainSpec& spec) const {
    return {{"seed", seed},
            {"init_seed", spec.init_seed.value},
            {"shuffle_seed", spec.shuffle_seed.value},
            {"embedding_seed", random_dim ? json(seed) : json(nullptr)}};
  }

  void check_outputs() const {
    if (!save_embeddings.empty()) require_output_dir(save_embeddings);
    if (!report.empty()) require_output_dir(report);
  }
};

// ---------------------------------------------------------------- pretrain

struct PretrainArgs {
  TrainingArgs train;
  std::string out;
};

void pretrain_cmd(const PretrainArgs& a, std::ostream& out) {
  require_output_dir(a.out);
  a.train.check_outputs();
  const auto records = load_records(a.train.dataset);
  const auto store = a.train.store(records);
  const auto config = a.train.config(store.dim());
  const auto spec = a.train.train_spec(records.size());

  auto result = pretrain(config, store, records, spec);
  save_checkpoint(result.params, a.out);

  json report{{"command", "pretrain"},
              {"parameters", a.train.echo(config, spec)},
              {"seeds", a.train.seeds(spec)},
              {"out", a.out},
              {"records", records.size()},
              {"steps", result.step_losses.size()},
              {"epoch_losses", result.epoch_losses},
              {"fallback_count", result.fallback_records},
              {"fallback_labels", result.fallback_labels},
              {"final_loss", evaluate_loss(result.params, store, records, spec)}};
  emit_report(report, a.train.report, out);
}

// ---------------------------------------------------------------- loo-run

struct LooArgs {
  TrainingArgs train;
  std::string lookup;
  std::string checkpoint_dir;
  std::string vocab;
  std::size_t workers = 1;
};

void loo_cmd(const LooArgs& a, std::ostream& out) {
  if (a.train.report.empty()) throw Error("--out is required");
  a.train.check_outputs();
  if (!a.lookup.empty()) require_output_dir(a.lookup);
  if (!a.checkpoint_dir.empty() && !fs::is_directory(a.checkpoint_dir)) {
    throw Error("checkpoint directory does not exist: " + a.checkpoint_dir);
  }

  TrainingArgs train = a.train;
  train.preparation = a.train.preparation == "inst" ? "loo" : a.train.preparation;
  const auto records = load_records(train.dataset);
  const auto store = train.store(records);
  const auto config = train.config(store.dim());
  const auto spec = train.train_spec(records.size());

  LooOptions options;
  options.workers = a.workers;
  options.binning = train.binning.spec();
  options.keep_models = !a.checkpoint_dir.empty();
  auto report = run_loo(config, store, records, spec, options);

  json rows = json::array();
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& row = report.rows[i];
    rows.push_back({{"label", row.prediction.label},
                    {"predicted_depth", row.prediction.mean_depth},
                    {"ground_truth_depth", row.ground_truth_depth},
                    {"fallback", row.fallback},
                    {"epoch_losses", row.epoch_losses}});
    if (options.keep_models) {
      char name[32];
      std::snprintf(name, sizeof(name), "loo_%04zu.dhl2", i);
      save_checkpoint(report.models[i], fs::path(a.checkpoint_dir) / name);
    }
  }

  if (!a.lookup.empty()) {
    std::vector<std::string> vocabulary;
    if (!a.vocab.empty()) {
      vocabulary = load_vocabulary(a.vocab);
    } else {
      for (const auto& row : report.rows) vocabulary.push_back(row.prediction.label);
    }
    save_lookup(export_lookup(report, vocabulary), a.lookup);
  }

  json j{{"command", "loo-run"},
         {"parameters", train.echo(config, spec)},
         {"seeds", train.seeds(spec)},
         {"workers", a.workers},
         {"classes", report.rows.size()},
         {"fallback_count", report.fallback_count},
         {"metrics", report.metrics},
         {"metrics_table", format_metrics_table(report.metrics)},
         {"rows", rows}};
  emit_report(j, train.report, out);
  out << format_metrics_table(report.metrics);
}

// ---------------------------------------------------------------- eval

std::vector<double> read_depth_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::vector<double> out;
  std::string token;
  while (in >> token) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw Error(path + ": not a number: '" + token + "'");
    }
  }
  return out;
}

struct EvalArgs {
  std::string pred_file;
  std::string gt_file;
  std::string report;
};

void eval_cmd(const EvalArgs& a, std::ostream& out) {
  if (!a.report.empty()) require_output_dir(a.report);
  const auto pred = read_depth_list(a.pred_file);
  const auto gt = read_depth_list(a.gt_file);
  const auto metrics = eigen_metrics(pred, gt);
  json j{{"command", "eval"},
         {"parameters", {{"pred_file", a.pred_file}, {"gt_file", a.gt_file}}},
         {"metrics", metrics}};
  emit_report(j, a.report, out);
  out << format_metrics_table(metrics);
}

// ---------------------------------------------------------------- render-hints

struct RenderArgs {
  std::string frame;
  std::string model;
  std::string lookup;
  std::string embeddings;
  std::string out;
  std::string report;
};

void render_cmd(const RenderArgs& a, std::ostream& out) {
  require_output_dir(a.out);
  if (!a.report.empty()) require_output_dir(a.report);
  if (a.model.empty() == a.lookup.empty()) throw Error("exactly one of --model or --lookup is required");
  if (!a.model.empty() && a.embeddings.empty()) throw Error("--model requires --embeddings");

  const auto frame = load_frame(a.frame);
  RenderReport rr;
  HintPlane plane;
  std::string source;
  if (!a.lookup.empty()) {
    plane = render_scalar(frame, load_lookup(a.lookup), &rr);
    source = "lookup";
  } else {
    const auto params = load_checkpoint(a.model);
    const auto store = load_store(a.embeddings);
    plane = params.mode == L2DMode::LogMean ? render_scalar(frame, params, store, &rr)
                                            : render_features(frame, params, store, &rr);
    source = "model:" + to_string(params.mode);
  }
  save_plane(plane, a.out);

  json j{{"command", "render-hints"},
         {"parameters",
          {{"frame", a.frame}, {"model", a.model}, {"lookup", a.lookup},
           {"embeddings", a.embeddings}, {"out", a.out}}},
         {"source", source},
         {"height", plane.height},
         {"width", plane.width},
         {"channels", plane.channels},
         {"label_evaluations", rr.evaluations},
         {"fallback_count", rr.fallback_labels.size()},
         {"fallback_labels", rr.fallback_labels}};
  emit_report(j, a.report, out);
}

// ---------------------------------------------------------------- gen-synthetic

struct SyntheticArgs {
  std::size_t classes = 64;
  std::size_t dim = 128;
  std::size_t signal = 8;
  double noise = 0.1;
  std::uint64_t seed = 0;
  std::string out_prefix;
  BinningFlags binning;
  std::string report;
};

void synthetic_cmd(const SyntheticArgs& a, std::ostream& out) {
  require_output_dir(a.out_prefix);
  const auto data = gen_synthetic(a.classes, a.dim, a.signal, a.noise, {a.seed}, a.binning.spec());
  const std::string emb_path = a.out_prefix + ".dhemb";
  const std::string data_path = a.out_prefix + ".jsonl";
  const std::string vocab_path = a.out_prefix + ".vocab";
  save_store(data.store, emb_path);
  save_records(data.records, data_path);
  {
    std::ofstream v(vocab_path, std::ios::binary | std::ios::trunc);
    for (const auto& r : data.records) v << r.label << '\n';
    if (!v) throw Error("write failed for " + vocab_path);
  }
  json j{{"command", "gen-synthetic"},
         {"parameters",
          {{"classes", a.classes}, {"dim", a.dim}, {"signal", a.signal}, {"noise", a.noise},
           {"out_prefix", a.out_prefix}, {"binning", a.binning.to_json()}}},
         {"seeds", {{"seed", a.seed}}},
         {"embeddings", emb_path},
         {"dataset", data_path},
         {"vocabulary", vocab_path}};
  emit_report(j, a.report, out);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Language-to-depth hint toolkit"};
  app.require_subcommand(1);

  std::uint64_t seed_default = 0;
  try {
    seed_default = default_seed();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  BuildDatasetArgs build;
  build.binning = {};
  auto* build_app = app.add_subcommand("build-dataset", "Build inst or loo datasets from DHF1 frames");
  build_app->add_option("--manifest", build.manifest, "Frame list, one path per line")->required()->check(CLI::ExistingFile);
  build_app->add_option("--out", build.out, "Output JSON-lines dataset")->required();
  build_app->add_flag("--loo", build.loo, "Aggregate per class over --vocab");
  build_app->add_option("--vocab", build.vocab, "Vocabulary, one label per line")->check(CLI::ExistingFile);
  build_app->add_option("--pooling", build.pooling, "pixel or instance")->capture_default_str();
  build.binning.add(build_app);
  build_app->add_option("--report", build.report, "Run report path (default: stdout)");

  PretrainArgs pre;
  pre.train.seed = seed_default;
  auto* pre_app = app.add_subcommand("pretrain", "Train one L2D model");
  pre.train.add(pre_app);
  pre_app->add_option("--out", pre.out, "Output DHL2 checkpoint")->required();

  LooArgs loo;
  loo.train.seed = seed_default;
  auto* loo_app = app.add_subcommand("loo-run", "Leave-one-out training and evaluation");
  loo.train.add(loo_app);
  loo_app->get_option("--report")->description("Alias of --out");
  loo_app->add_option("--out", loo.train.report, "Output report (JSON)");
  loo_app->add_option("--lookup", loo.lookup, "Output lookup table (JSON-lines)");
  loo_app->add_option("--checkpoint-dir", loo.checkpoint_dir, "Save each held-out model here");
  loo_app->add_option("--vocab", loo.vocab, "Vocabulary for the lookup table")->check(CLI::ExistingFile);
  loo_app->add_option("--workers", loo.workers, "Parallel leave-one-out runs")->capture_default_str();

  EvalArgs ev;
  auto* eval_app = app.add_subcommand("eval", "Depth metrics for paired prediction/ground-truth lists");
  eval_app->add_option("--pred-file", ev.pred_file)->required()->check(CLI::ExistingFile);
  eval_app->add_option("--gt-file", ev.gt_file)->required()->check(CLI::ExistingFile);
  eval_app->add_option("--report", ev.report, "Run report path (default: stdout)");

  RenderArgs rend;
  auto* render_app = app.add_subcommand("render-hints", "Render a DHP1 hint plane for a frame");
  render_app->add_option("--frame", rend.frame)->required()->check(CLI::ExistingFile);
  auto* model_opt = render_app->add_option("--model", rend.model)->check(CLI::ExistingFile);
  auto* lookup_opt = render_app->add_option("--lookup", rend.lookup)->check(CLI::ExistingFile);
  model_opt->excludes(lookup_opt);
  render_app->add_option("--embeddings", rend.embeddings)->check(CLI::ExistingFile);
  render_app->add_option("--out", rend.out)->required();
  render_app->add_option("--report", rend.report, "Run report path (default: stdout)");

  SyntheticArgs syn;
  syn.seed = seed_default;
  auto* syn_app = app.add_subcommand("gen-synthetic", "Write a synthetic embedding/class dataset");
  syn_app->add_option("--classes", syn.classes)->capture_default_str();
  syn_app->add_option("--dim", syn.dim)->capture_default_str();
  syn_app->add_option("--signal", syn.signal)->capture_default_str();
  syn_app->add_option("--noise", syn.noise)->capture_default_str();
  syn_app->add_option("--seed", syn.seed);
  syn_app->add_option("--out-prefix", syn.out_prefix)->required();
  syn.binning.add(syn_app);
  syn_app->add_option("--report", syn.report, "Run report path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }

  try {
    if (*build_app) build_dataset(build, out);
    if (*pre_app) pretrain_cmd(pre, out);
    if (*loo_app) loo_cmd(loo, out);
    if (*eval_app) eval_cmd(ev, out);
    if (*render_app) render_cmd(rend, out);
    if (*syn_app) synthetic_cmd(syn, out);
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumericalError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInputError;
  }
  return kExitOk;
}

}  // namespace langdepth::cli
