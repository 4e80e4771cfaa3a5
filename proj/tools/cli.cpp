#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "lidarseg/calibration.hpp"
#include "lidarseg/errors.hpp"
#include "lidarseg/evalkit.hpp"
#include "lidarseg/maskgen.hpp"
#include "lidarseg/ply_io.hpp"
#include "lidarseg/png_io.hpp"
#include "lidarseg/synthworld.hpp"
#include "lidarseg/train.hpp"

namespace lidarseg::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Options bound both to CLI flags and to keys of an optional JSON config file.
// Keys are the flag names without the leading dashes.
class OptionSet {
 public:
  explicit OptionSet(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_path_, "JSON file with option values (flags take precedence)");
  }

  template <class T>
  CLI::Option* add(const std::string& name, T& var, const std::string& help) {
    CLI::Option* opt = app_->add_option("--" + name, var, help)->capture_default_str();
    entries_.push_back({name, opt, [&var](const json& j) { var = j.get<T>(); }, [&var] { return json(var); }});
    return opt;
  }

  // Fills options not given on the command line from the config file.
  void resolve() {
    if (config_path_.empty()) return;
    std::ifstream in(config_path_);
    if (!in) throw DataError(config_path_ + ": cannot open config file");
    json cfg;
    try {
      cfg = json::parse(in);
    } catch (const json::parse_error& e) {
      throw UsageError(config_path_ + ": " + e.what());
    }
    if (!cfg.is_object()) throw UsageError(config_path_ + ": config must be a JSON object");
    for (const auto& [key, value] : cfg.items()) {
      auto it = std::find_if(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.name == key; });
      if (it == entries_.end()) throw UsageError(config_path_ + ": unknown option '" + key + "'");
      if (it->option->count() > 0) continue;
      try {
        it->assign(value);
      } catch (const json::exception& e) {
        throw UsageError(config_path_ + ": bad value for '" + key + "': " + e.what());
      }
    }
  }

  [[nodiscard]] json resolved() const {
    json j = json::object();
    for (const auto& e : entries_) j[e.name] = e.dump();
    return j;
  }

 private:
  struct Entry {
    std::string name;
    CLI::Option* option;
    std::function<void(const json&)> assign;
    std::function<json()> dump;
  };
  CLI::App* app_;
  std::string config_path_;
  std::vector<Entry> entries_;
};

void announce(std::ostream& out, const std::string& command, const json& resolved, std::uint64_t seed) {
  out << "lidarseg " << command << "\n" << resolved.dump(2) << "\nseed: " << seed << "\n";
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError(path.string() + ": cannot open for writing");
  f << text;
  if (!f) throw DataError(path.string() + ": write failed");
}

void write_config(const fs::path& path, const std::string& command, const json& resolved) {
  json j = json::object();
  j["command"] = command;
  j["options"] = resolved;
  write_text(path, j.dump(2) + "\n");
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
  int scenes = 200;
  std::string out;
  std::uint64_t seed = 1;
  int epochs = 0;
  std::string lidar_preset = "dense16";
  double noise_ratio = 0.5;
  double region_fraction = 0.5;
};

// --- project ----------------------------------------------------------------

struct ProjectArgs {
  std::string cloud;
  std::string calib;
  std::string out_prefix;
  double noise_ratio = 0.5;
  double region_fraction = 0.5;
  std::uint64_t seed = 1;
};

// --- train / eval / conditions / sweep -------------------------------------

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::uint64_t seed = 1;
  int epochs = 150;
  int batch_size = 8;
  double mix_ratio = 1.0;
  std::string mix_mode = "partition";
  bool augment = true;
  double lr_initial = 1e-3;
  double lr_final = 5e-4;
};

struct EvalArgs {
  std::string checkpoint;
  std::string manifest;
  std::string out;
  std::uint64_t seed = 1;
  int epochs = 0;
  double threshold = 0.5;
  bool overlays = false;
};

struct SweepArgs {
  std::string ratios = "0,0.25,0.5,1";
};

void add_training_options(OptionSet& opts, TrainArgs& a) {
  opts.add("manifest", a.manifest, "dataset manifest (dataset.jsonl)");
  opts.add("out", a.out, "output directory");
  opts.add("seed", a.seed, "training seed");
  opts.add("epochs", a.epochs, "training epochs");
  opts.add("batch-size", a.batch_size, "minibatch size");
  opts.add("augment", a.augment, "random horizontal flips");
  opts.add("lr-initial", a.lr_initial, "learning rate at the first epoch");
  opts.add("lr-final", a.lr_final, "learning rate at the last epoch");
}

TrainConfig to_train_config(const TrainArgs& a) {
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.seed = a.seed;
  cfg.mix_ratio = a.mix_ratio;
  if (a.mix_mode == "partition")
    cfg.mix_mode = MixMode::Partition;
  else if (a.mix_mode == "union")
    cfg.mix_mode = MixMode::Union;
  else
    throw UsageError("--mix-mode must be 'partition' or 'union', got '" + a.mix_mode + "'");
  cfg.augment = a.augment;
  cfg.lr_initial = a.lr_initial;
  cfg.lr_final = a.lr_final;
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required (flag or config file)");
}

std::vector<double> parse_ratios(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v >= 0.0 && v <= 1.0))
      throw UsageError("--ratios: '" + item + "' is not a ratio in [0, 1]");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--ratios: empty list");
  return out;
}

std::string slug(const std::string& condition) {
  if (condition == kConditionDense) return "dense";
  if (condition == kConditionSparse) return "sparse";
  if (condition == kConditionMixed) return "mixed";
  std::string s;
  for (char c : condition) s += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return s;
}

LoadedDataset load_dataset(const std::string& manifest) { return LoadedDataset::load(load_manifest(manifest)); }

int dispatch(int argc, const char* const* argv, std::ostream& out) {
  CLI::App app{"Road segmentation from sparse lidar supervision"};
  app.name("lidarseg");
  app.require_subcommand(1);

  SynthArgs synth;
  CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
  OptionSet o_synth(c_synth);
  o_synth.add("scenes", synth.scenes, "number of scenes");
  o_synth.add("out", synth.out, "output directory");
  o_synth.add("seed", synth.seed, "dataset seed");
  o_synth.add("epochs", synth.epochs, "unused; accepted for a uniform interface");
  o_synth.add("lidar-preset", synth.lidar_preset, "dense16 | dense64 | dual32");
  o_synth.add("noise-ratio", synth.noise_ratio, "noise pixels per projected point");
  o_synth.add("region-fraction", synth.region_fraction, "top fraction of rows that receive noise");

  ProjectArgs proj;
  CLI::App* c_proj = app.add_subcommand("project", "project a labeled point cloud into sparse masks");
  OptionSet o_proj(c_proj);
  o_proj.add("cloud", proj.cloud, "PLY point cloud in the lidar frame");
  o_proj.add("calib", proj.calib, "calibration JSON");
  o_proj.add("out-prefix", proj.out_prefix, "writes <prefix>_gt.png and <prefix>_valid.png");
  o_proj.add("noise-ratio", proj.noise_ratio, "noise pixels per projected point");
  o_proj.add("region-fraction", proj.region_fraction, "top fraction of rows that receive noise");
  o_proj.add("seed", proj.seed, "noise seed");

  TrainArgs tr;
  CLI::App* c_train = app.add_subcommand("train", "train MicroNet on a manifest");
  OptionSet o_train(c_train);
  add_training_options(o_train, tr);
  o_train.add("mix-ratio", tr.mix_ratio, "fraction of train frames supervised densely");
  o_train.add("mix-mode", tr.mix_mode, "partition | union");

  EvalArgs ev;
  CLI::App* c_eval = app.add_subcommand("eval", "mean IoU of a checkpoint on the val split");
  OptionSet o_eval(c_eval);
  o_eval.add("checkpoint", ev.checkpoint, "model checkpoint");
  o_eval.add("manifest", ev.manifest, "dataset manifest");
  o_eval.add("out", ev.out, "optional output directory");
  o_eval.add("seed", ev.seed, "unused; accepted for a uniform interface");
  o_eval.add("epochs", ev.epochs, "unused; accepted for a uniform interface");
  o_eval.add("threshold", ev.threshold, "probability threshold");
  o_eval.add("overlays", ev.overlays, "write overlay PNGs per val frame into --out");

  TrainArgs cond;
  CLI::App* c_cond = app.add_subcommand("conditions", "dense, sparse and mixed training runs");
  OptionSet o_cond(c_cond);
  add_training_options(o_cond, cond);

  TrainArgs sw;
  SweepArgs swr;
  CLI::App* c_sweep = app.add_subcommand("sweep", "IoU as a function of the dense ratio");
  OptionSet o_sweep(c_sweep);
  add_training_options(o_sweep, sw);
  o_sweep.add("ratios", swr.ratios, "comma-separated dense ratios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg;
    const int code = app.exit(e, out, msg);
    if (code != 0) throw UsageError(msg.str().empty() ? e.what() : msg.str());
    return kOk;  // --help
  }

  if (c_synth->parsed()) {
    o_synth.resolve();
    require(synth.out, "--out");
    const json resolved = o_synth.resolved();
    announce(out, "synth", resolved, synth.seed);
    if (synth.scenes < 0) throw UsageError("--scenes must be non-negative");
    const auto lidar = LidarSpec::preset(synth.lidar_preset);
    if (!lidar) throw UsageError("unknown --lidar-preset '" + synth.lidar_preset + "'");
    VariationConfig vc;
    vc.mask_noise.density_ratio = synth.noise_ratio;
    vc.mask_noise.region_fraction = synth.region_fraction;
    try {
      vc.mask_noise.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const auto records = generate_dataset(synth.scenes, vc, default_camera(), *lidar, synth.out, synth.seed);
    write_config(fs::path(synth.out) / "config.json", "synth", resolved);
    out << "wrote " << records.size() << " records to " << (fs::path(synth.out) / "dataset.jsonl").string() << "\n";
    return kOk;
  }

  if (c_proj->parsed()) {
    o_proj.resolve();
    require(proj.cloud, "--cloud");
    require(proj.calib, "--calib");
    require(proj.out_prefix, "--out-prefix");
    const json resolved = o_proj.resolved();
    announce(out, "project", resolved, proj.seed);
    NoiseConfig noise{proj.noise_ratio, proj.region_fraction, proj.seed};
    try {
      noise.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    const LabeledPointCloud cloud = ply::read(proj.cloud);
    const CalibratedCamera calib = load_calibration(proj.calib);
    const auto projected = project_cloud(cloud, calib.intrinsics, calib.camera_from_lidar);
    const ImageSize dims{calib.intrinsics.width, calib.intrinsics.height};
    const SparseGroundTruth gt = build_sparse_gt(projected, dims, noise);
    const fs::path prefix(proj.out_prefix);
    if (prefix.has_parent_path()) fs::create_directories(prefix.parent_path());
    save_masks(prefix, gt);
    write_config(fs::path(proj.out_prefix + "_config.json"), "project", resolved);
    out << "projected " << projected.size() << " of " << cloud.points.size() << " points; " << gt.valid_count()
        << " valid pixels\n";
    return kOk;
  }

  if (c_train->parsed()) {
    o_train.resolve();
    require(tr.manifest, "--manifest");
    require(tr.out, "--out");
    const json resolved = o_train.resolved();
    announce(out, "train", resolved, tr.seed);
    const TrainConfig cfg = to_train_config(tr);
    const TrainResult result = train(load_manifest(tr.manifest), cfg, &out);
    const fs::path dir(tr.out);
    fs::create_directories(dir);
    save_checkpoint(dir / "model.lsmn", result.net);
    write_text(dir / "metrics.csv", metrics_csv(result.metrics));
    write_config(dir / "config.json", "train", resolved);
    out << "final val IoU " << result.metrics.back().val_iou << "\n";
    return kOk;
  }

  if (c_eval->parsed()) {
    o_eval.resolve();
    require(ev.checkpoint, "--checkpoint");
    require(ev.manifest, "--manifest");
    if (ev.overlays && ev.out.empty()) throw UsageError("--overlays needs --out");
    if (!(ev.threshold > 0.0 && ev.threshold < 1.0)) throw UsageError("--threshold must lie in (0, 1)");
    const json resolved = o_eval.resolved();
    announce(out, "eval", resolved, ev.seed);
    const double score = evaluate(fs::path(ev.checkpoint), fs::path(ev.manifest), ev.threshold);
    char value[32];
    std::snprintf(value, sizeof value, "%.6f", score);
    out << "IoU " << value << "\n";
    if (!ev.out.empty()) {
      const fs::path dir(ev.out);
      write_text(dir / "eval.csv", std::string("iou\n") + value + "\n");
      write_config(dir / "config.json", "eval", resolved);
      if (ev.overlays) {
        const MicroNet<float> net = load_checkpoint(ev.checkpoint);
        const LoadedDataset data = load_dataset(ev.manifest);
        fs::create_directories(dir / "overlays");
        for (const LoadedFrame* f : data.split(Split::Val))
          png::write_rgb(dir / "overlays" / (f->id + ".png"),
                         overlay(f->image, binarize(net.predict(f->image), ev.threshold)));
      }
    }
    return kOk;
  }

  if (c_cond->parsed()) {
    o_cond.resolve();
    require(cond.manifest, "--manifest");
    require(cond.out, "--out");
    const json resolved = o_cond.resolved();
    announce(out, "conditions", resolved, cond.seed);
    const TrainConfig cfg = to_train_config(cond);
    const ExperimentReport report = run_conditions(load_dataset(cond.manifest), cfg, &out);
    const fs::path dir(cond.out);
    fs::create_directories(dir);
    for (const auto& c : report.conditions) {
      save_checkpoint(dir / (slug(c.name) + ".lsmn"), c.training.net);
      write_text(dir / (slug(c.name) + "_metrics.csv"), metrics_csv(c.training.metrics));
    }
    const std::string csv = conditions_csv(report);
    write_text(dir / "conditions.csv", csv);
    write_config(dir / "config.json", "conditions", resolved);
    out << csv;
    return kOk;
  }

  if (c_sweep->parsed()) {
    o_sweep.resolve();
    require(sw.manifest, "--manifest");
    require(sw.out, "--out");
    const json resolved = o_sweep.resolved();
    announce(out, "sweep", resolved, sw.seed);
    const std::vector<double> ratios = parse_ratios(swr.ratios);
    const TrainConfig cfg = to_train_config(sw);
    const ExperimentReport report = run_ratio_sweep(load_dataset(sw.manifest), ratios, cfg, &out);
    const fs::path dir(sw.out);
    fs::create_directories(dir);
    const std::string csv = sweep_csv(report);
    write_text(dir / "sweep.csv", csv);
    write_config(dir / "config.json", "sweep", resolved);
    out << csv;
    return kOk;
  }
  return kUsage;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(argc, argv, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << "\n";
    return kNumerical;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
}

}  // namespace lidarseg::cli
