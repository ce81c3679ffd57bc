#include "app/commands.hpp"

#include <filesystem>
#include <sstream>

#include "bench/bench.hpp"
#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/format.hpp"
#include "data/split.hpp"
#include "data/synthetic.hpp"
#include "explain/explain.hpp"
#include "preprocess/pipeline.hpp"
#include "training/metrics.hpp"
#include "training/sweep.hpp"
#include "training/trainer.hpp"

namespace ccan {

namespace fs = std::filesystem;

namespace {

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (parent.empty()) return;
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw IoError("cannot create directory " + parent.string() + ": " + ec.message());
}

// The resolved configuration, so any command can be replayed with --config.
void echo_config(const RunConfig& config, const std::string& command) {
  const std::string path = config.run_dir() + "/config." + command + ".txt";
  ensure_parent(path);
  write_text_file(path, "# resolved configuration for '" + command + "'\n" + config.dump());
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const Fold& plan_fold(const SplitPlan& plan, std::size_t fold) {
  if (fold >= plan.folds.size()) {
    throw ConfigError("train.fold = " + std::to_string(fold) + " but the split plan has " +
                      std::to_string(plan.folds.size()) + " folds");
  }
  return plan.folds[fold];
}

void cmd_preprocess(const RunConfig& config, std::ostream& log) {
  const auto inputs = split_commas(config.get("preprocess.inputs"));
  if (inputs.empty()) throw UsageError("preprocess needs preprocess.inputs (comma-separated P5/P6 images)");
  std::string out_dir = config.get("preprocess.out_dir");
  if (out_dir.empty()) out_dir = config.run_dir() + "/data";
  const PipelineOptions options = config.pipeline_options();
  std::vector<ManifestEntry> manifest;
  for (const auto& input : inputs) {
    // Metadata sits next to the image with a .txt extension.
    const std::string sidecar_path = fs::path(input).replace_extension(".txt").string();
    const ImageSidecar meta = read_sidecar(sidecar_path);
    RasterImage img = read_pnm(input);
    img.microns_per_pixel = meta.microns_per_pixel;
    const std::string bag_file = meta.bag_id + ".ccfb";
    const std::string bag_path = out_dir + "/" + bag_file;
    ensure_parent(bag_path);
    const QcReport qc = run_pipeline(img, bag_path, meta.label, meta.bag_id, meta.patient_id, options,
                                     out_dir + "/" + meta.bag_id + ".qc.csv");
    log << "preprocess " << input << ": " << qc.total << " patches, " << qc.white_rejected << " white, "
        << qc.blur_rejected << " blurry, " << qc.kept << " kept\n";
    manifest.push_back({meta.bag_id, meta.patient_id, meta.label, bag_file});
  }
  write_manifest(manifest, out_dir + "/manifest.csv");
}

void cmd_synth(const RunConfig& config, std::ostream& log) {
  const SyntheticDataset ds = generate_synthetic(config.synth_params());
  const std::string manifest_path = config.manifest_path();
  const fs::path base = fs::path(manifest_path).parent_path();
  ensure_parent((base / "bags" / "x").string());
  std::vector<ManifestEntry> entries;
  std::ostringstream witness;
  witness << "bag_id,token\n";
  for (std::size_t b = 0; b < ds.bags.size(); ++b) {
    const FeatureBag& bag = ds.bags[b];
    const std::string rel = "bags/" + bag.bag_id + ".ccfb";
    write_bag(bag, (base / rel).string());
    entries.push_back({bag.bag_id, bag.patient_id, bag.label, rel});
    for (std::size_t i = 0; i < ds.witness[b].size(); ++i) {
      if (ds.witness[b][i]) witness << bag.bag_id << ',' << i << '\n';
    }
  }
  write_manifest(entries, manifest_path);
  write_text_file((base / "witness.csv").string(), witness.str());
  log << "synth: wrote " << ds.bags.size() << " bags to " << manifest_path << '\n';
}

void cmd_split(const RunConfig& config, std::ostream& log) {
  const auto bags = load_manifest_bags(config.manifest_path());
  const SplitPlan plan = patient_grouped_kfold(bags, config.get_size("split.k"), config.get_real("split.val_fraction"),
                                               derive_seed(config.get_u64("run.seed"), "split"));
  const std::string path = config.split_path();
  ensure_parent(path);
  write_split_plan(plan, path);
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    log << "split fold " << f << ": train " << plan.folds[f].train.size() << ", val " << plan.folds[f].val.size()
        << ", test " << plan.folds[f].test.size() << '\n';
  }
}

void cmd_train(const RunConfig& config, std::ostream& log) {
  const auto bags = load_manifest_bags(config.manifest_path());
  const SplitPlan plan = read_split_plan(config.split_path());
  const std::size_t fold_index = config.get_size("train.fold");
  const Fold& fold = plan_fold(plan, fold_index);
  const std::string tag = std::to_string(fold_index);
  TrainableModel model = TrainableModel::create(config.model_kind(), config.model_config(),
                                                derive_seed(config.get_u64("run.seed"), "init/" + tag));
  TrainConfig train_config = config.train_config();
  train_config.seed = derive_seed(train_config.seed, "fold/" + tag);
  const TrainHistory history = train(model, select_bags(bags, fold.train), select_bags(bags, fold.val),
                                     select_bags(bags, fold.test), train_config);
  const std::string dir = config.fold_dir(fold_index);
  const std::string checkpoint = config.checkpoint_path(fold_index);
  ensure_parent(checkpoint);
  ensure_parent(dir + "/history.csv");
  save_checkpoint(model, checkpoint);
  write_history_csv(history, dir + "/history.csv");
  write_summary_csv(history, dir + "/summary.csv");
  log << "train fold " << fold_index << ": best epoch " << history.best_epoch << ", val AUC "
      << format_double(history.best_val_auc) << ", test AUC " << format_double(history.test_auc_at_best) << '\n';
}

void cmd_eval(const RunConfig& config, std::ostream& log) {
  const auto bags = load_manifest_bags(config.manifest_path());
  const SplitPlan plan = read_split_plan(config.split_path());
  const std::size_t fold_index = config.get_size("train.fold");
  const Fold& fold = plan_fold(plan, fold_index);
  const std::string& set = config.get("eval.set");
  const std::vector<std::string>* ids = set == "train" ? &fold.train : set == "val" ? &fold.val : set == "test" ? &fold.test : nullptr;
  if (ids == nullptr) throw ConfigError("eval.set: expected train, val or test, got '" + set + "'");
  const TrainableModel model = load_checkpoint(config.checkpoint_path(fold_index));
  const BagRefs refs = select_bags(bags, *ids);
  const auto probs = predict_all(model, refs);
  const double auc = auc_for_outputs(probs, bag_labels(refs));

  std::ostringstream out;
  out << "bag_id,label";
  for (std::size_t c = 0; c < probs.front().size(); ++c) out << ",p" << c;
  out << '\n';
  for (std::size_t i = 0; i < refs.size(); ++i) {
    out << refs[i]->bag_id << ',' << refs[i]->label;
    for (double p : probs[i]) out << ',' << format_double(p);
    out << '\n';
  }
  const std::string path = config.fold_dir(fold_index) + "/eval_" + set + ".csv";
  ensure_parent(path);
  write_text_file(path, out.str());
  log << "eval fold " << fold_index << " " << set << ": AUC " << format_double(auc) << " over " << refs.size()
      << " bags\n";
}

void cmd_sweep(const RunConfig& config, std::ostream& log) {
  const auto bags = load_manifest_bags(config.manifest_path());
  const SplitPlan plan = read_split_plan(config.split_path());
  SweepOptions options;
  options.folds = config.get_sizes("sweep.folds");
  options.models.clear();
  for (const auto& name : split_commas(config.get("sweep.models"))) options.models.push_back(parse_model_kind(name));
  options.jobs = config.get_size("sweep.jobs");
  options.patient_atomic_subsample = config.get_bool("sweep.patient_atomic");
  const auto rows = data_efficiency_sweep(bags, plan, config.model_config(), config.train_config(), options);
  std::string path = config.get("sweep.out");
  if (path.empty()) path = config.run_dir() + "/sweep.csv";
  ensure_parent(path);
  write_sweep_csv(rows, path);
  log << "sweep: " << rows.size() << " cells written to " << path << '\n';
}

FeatureBag find_bag(const RunConfig& config, const std::string& which) {
  if (fs::path(which).extension() == ".ccfb") return read_bag(which);
  for (auto& bag : load_manifest_bags(config.manifest_path())) {
    if (bag.bag_id == which) return bag;
  }
  throw DataError("bag '" + which + "' not found in " + config.manifest_path());
}

void cmd_explain(const RunConfig& config, std::ostream& log) {
  const std::string& checkpoint = config.get("explain.checkpoint");
  if (checkpoint.empty()) throw UsageError("explain needs explain.checkpoint (path to a trained CCAN checkpoint)");
  const std::string& which = config.get("explain.bag");
  if (which.empty()) throw UsageError("explain needs explain.bag (a bag id from the manifest or a .ccfb path)");
  const TrainableModel model = load_checkpoint(checkpoint);
  if (model.ccan() == nullptr) throw UsageError("explain requires a CCAN checkpoint, got " + to_string(model.kind()));
  const FeatureBag bag = find_bag(config, which);

  ModelOutput<float> out;
  {
    NoGradGuard no_grad;
    out = forward(*model.ccan(), bag, nullptr, false);
  }
  const AttentionMap map = aggregate_rollout(out, bag);
  std::string stem = config.get("explain.out");
  if (stem.empty()) stem = config.run_dir() + "/explain/" + bag.bag_id;
  ensure_parent(stem);
  export_heatmap(map, stem);

  const std::size_t k = std::min(config.get_size("explain.top_k"), bag.size());
  const TopPatches top = top_k_patches(map, k);
  log << "explain " << bag.bag_id << ": p = " << format_double(out.averaged_probs.front()) << ", heatmap " << stem
      << ".csv/.pgm\n  highest:";
  for (std::size_t i : top.highest) log << " (" << bag.coords[i].row << "," << bag.coords[i].col << ")";
  log << "\n  lowest:";
  for (std::size_t i : top.lowest) log << " (" << bag.coords[i].row << "," << bag.coords[i].col << ")";
  log << '\n';
}

void cmd_embed(const RunConfig& config, std::ostream& log) {
  std::string checkpoint = config.get("embed.checkpoint");
  if (checkpoint.empty()) checkpoint = config.checkpoint_path(config.get_size("train.fold"));
  const TrainableModel model = load_checkpoint(checkpoint);
  if (model.ccan() == nullptr) throw UsageError("embed requires a CCAN checkpoint, got " + to_string(model.kind()));
  const auto bags = load_manifest_bags(config.manifest_path());
  std::string path = config.get("embed.out");
  if (path.empty()) path = config.run_dir() + "/embeddings.csv";
  ensure_parent(path);
  export_class_embeddings(*model.ccan(), bags, path);
  log << "embed: " << bags.size() << " bags written to " << path << '\n';
}

void cmd_bench(const RunConfig& config, std::ostream& log) {
  const ScalingReport report = bench_scaling(config.model_config(), config.get_sizes("bench.Ns"), config.bench_options());
  std::string path = config.get("bench.out");
  if (path.empty()) path = config.run_dir() + "/bench.csv";
  ensure_parent(path);
  write_text_file(path, scaling_csv(report));
  log << scaling_summary(report);
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"preprocess", "synth", "split", "train", "eval",
                                              "sweep",      "explain", "bench", "embed"};
  return names;
}

void dispatch(const std::string& command, const RunConfig& config, std::ostream& log) {
  using Handler = void (*)(const RunConfig&, std::ostream&);
  static const std::vector<std::pair<std::string, Handler>> handlers{
      {"preprocess", cmd_preprocess}, {"synth", cmd_synth}, {"split", cmd_split},
      {"train", cmd_train},           {"eval", cmd_eval},   {"sweep", cmd_sweep},
      {"explain", cmd_explain},       {"bench", cmd_bench}, {"embed", cmd_embed}};
  for (const auto& [name, handler] : handlers) {
    if (name == command) {
      echo_config(config, command);
      handler(config, log);
      return;
    }
  }
  std::string list;
  for (const auto& n : command_names()) list += (list.empty() ? "" : ", ") + n;
  throw UsageError("unknown command '" + command + "' (expected one of: " + list + ")");
}

}  // namespace ccan
