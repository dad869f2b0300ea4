#include "ellipsedet_cli/commands.hpp"

#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/basic_file_sink.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "ellipsedet/biometrics.hpp"
#include "ellipsedet/dataset.hpp"
#include "ellipsedet/detector/net.hpp"
#include "ellipsedet/detector/train.hpp"
#include "ellipsedet/encoding.hpp"
#include "ellipsedet/errors.hpp"
#include "ellipsedet/fit.hpp"
#include "ellipsedet/geometry.hpp"
#include "ellipsedet_cli/overlay.hpp"

namespace ellipsedet::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct GlobalOptions {
  int threads = 1;
  std::string log_level = "info";
};

struct GenOptions {
  std::string out;
  GenConfig config;
};

struct TrainOptions {
  std::string data;
  std::string run_dir;
  TrainConfig config;
  bool only_iou = false;
  bool no_augment = false;
  std::string iou_attach = "gt";
};

struct EvalOptions {
  std::string data;
  std::string split = "test";
  std::string checkpoint;
  std::string predictions;
  bool oracle = false;
  bool roundtrip = false;
  bool per_scene = false;
  std::string run_dir;
};

struct FitOptions {
  std::vector<double> target;
  std::vector<double> init;
  std::optional<std::uint64_t> init_seed;
  FitConfig config;
  int print_every = 100;
  std::string run_dir;
};

struct IouOptions {
  std::vector<double> e1;
  std::vector<double> e2;
  int resolution = 1024;
};

struct OverlayOptions {
  std::string image;
  std::string gt;
  std::string pred;
  std::string entry;
  std::string out;
  std::string svg;
};

/// Swaps the default logger for one writing to `err` (and a run-directory log
/// file when requested); restores the previous logger on destruction.
class LogScope {
 public:
  LogScope(std::ostream& err, const std::string& level) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    sink->set_pattern("[%l] %v");
    logger_ = std::make_shared<spdlog::logger>("ellipsedet", sink);
    logger_->set_level(spdlog::level::from_str(level));
    spdlog::set_default_logger(logger_);
  }
  LogScope(const LogScope&) = delete;
  LogScope& operator=(const LogScope&) = delete;
  ~LogScope() {
    logger_->flush();
    spdlog::set_default_logger(previous_);
  }

  void add_file(const fs::path& path) {
    auto file = std::make_shared<spdlog::sinks::basic_file_sink_mt>(path.string(), true);
    file->set_pattern("%Y-%m-%d %H:%M:%S.%e [%l] %v");
    logger_->sinks().push_back(file);
  }

 private:
  std::shared_ptr<spdlog::logger> previous_;
  std::shared_ptr<spdlog::logger> logger_;
};

Ellipse ellipse_arg(const std::vector<double>& v, const std::string& name) {
  if (v.size() != 5) {
    throw InvalidArgument(name + ": expected cx,cy,a,b,theta (5 values), got " +
                          std::to_string(v.size()));
  }
  try {
    return Ellipse::make(v[0], v[1], v[2], v[3], v[4]);
  } catch (const InvalidArgument& ex) {
    throw InvalidArgument(name + ": " + ex.what());
  }
}

/// Creates the run directory, mirrors the log into it and stores the
/// resolved configuration next to it.
void prepare_run_dir(const std::string& dir, const CLI::App& app, const CLI::App& command,
                     LogScope& log) {
  // Keep the global keys and those of the command that runs.
  std::istringstream all(app.config_to_str(true, false));
  std::string resolved;
  const std::string prefix = command.get_name() + ".";
  for (std::string line; std::getline(all, line);) {
    const auto eq = line.find('=');
    const std::string key = line.substr(0, eq);
    if (key.find('.') == std::string::npos || key.rfind(prefix, 0) == 0) resolved += line + '\n';
  }
  if (dir.empty()) {
    spdlog::debug("resolved config:\n{}", resolved);
    return;
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create run directory " + dir + ": " + ec.message());
  log.add_file(fs::path(dir) / "log.txt");
  std::ofstream cfg(fs::path(dir) / "config.toml");
  if (!cfg) throw DataError("cannot write " + (fs::path(dir) / "config.toml").string());
  cfg << resolved;
  spdlog::info("resolved config written to {}", (fs::path(dir) / "config.toml").string());
}

std::string fmt_fixed(double v, int precision = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << v;
  return os.str();
}

// ---------------------------------------------------------------- gen

int cmd_gen(const GenOptions& o, const GlobalOptions& g, std::ostream& out) {
  GenConfig config = o.config;
  config.threads = g.threads;
  const GeneratedCounts counts = generate_dataset(o.out, config);
  out << "wrote " << counts.train << " train / " << counts.test << " test scenes to " << o.out
      << "\nconfig hash " << fnv1a_hex(config.canonical_string()) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

int cmd_train(TrainOptions o, const GlobalOptions& g, std::ostream& out) {
  TrainConfig& c = o.config;
  c.dataset_dir = o.data;
  c.checkpoint_path = fs::path(o.run_dir) / "checkpoint.bin";
  c.history_path = fs::path(o.run_dir) / "history.csv";
  c.threads = g.threads;
  if (o.only_iou) c.weights.lambda_e = 0.0;
  if (o.no_augment) c.augment = false;
  c.iou_attachment =
      o.iou_attach == "peaks" ? IouAttachment::kPredictedPeaks : IouAttachment::kGroundTruthCells;

  const TrainResult result = train(c, [&](const EpochRecord& r) {
    const LossBreakdown& b = r.train;
    std::ostringstream line;
    line << "epoch " << r.epoch << '/' << c.epochs << "  heatmap " << fmt_fixed(b.heatmap)
         << "  size " << fmt_fixed(b.size) << "  offset " << fmt_fixed(b.offset) << "  delta_a "
         << fmt_fixed(b.delta_a) << "  delta_b " << fmt_fixed(b.delta_b) << "  delta_theta "
         << fmt_fixed(b.delta_theta) << "  iou " << fmt_fixed(b.iou) << "  total "
         << fmt_fixed(b.total);
    if (r.has_val) {
      line << "  |  Dice_T " << fmt_fixed(r.val.dice_thorax) << "  Dice_C "
           << fmt_fixed(r.val.dice_heart) << "  Dice_all " << fmt_fixed(r.val.dice_all)
           << "  P_avg " << fmt_fixed(r.val.p_avg);
    }
    line << "  (" << fmt_fixed(r.seconds, 1) << " s)";
    out << line.str() << std::endl;
    spdlog::debug("{}", line.str());
  });
  out << "checkpoint " << c.checkpoint_path.string() << "\nhistory " << c.history_path.string()
      << '\n';
  (void)result;
  return kExitOk;
}

// ---------------------------------------------------------------- eval

json report_json(const BiometricReport& r) {
  return {{"Dice_T", r.dice_thorax},
          {"Dice_C", r.dice_heart},
          {"Dice_all", r.dice_all},
          {"P", r.ctr_precision},
          {"ctr_true", r.ctr_true},
          {"ctr_pred", r.ctr_pred},
          {"cardiac_axis_deg", r.cardiac_axis_deg},
          {"cardiac_axis_true_deg", r.cardiac_axis_true_deg},
          {"septum_dir_deg", r.septum_dir_deg},
          {"chest_line_dir_deg", r.chest_line_dir_deg}};
}

void print_table_row(std::ostream& out, double t, double c, double all, double p) {
  out << std::left << std::setw(10) << fmt_fixed(t) << std::setw(10) << fmt_fixed(c)
      << std::setw(10) << fmt_fixed(all) << fmt_fixed(p) << '\n';
}

int cmd_eval(const EvalOptions& o, const GlobalOptions& g, std::ostream& out) {
  const int modes = static_cast<int>(!o.checkpoint.empty()) + static_cast<int>(o.oracle) +
                    static_cast<int>(o.roundtrip) + static_cast<int>(!o.predictions.empty());
  if (modes != 1) {
    throw InvalidArgument(
        "eval: choose exactly one of --checkpoint, --predictions, --oracle, --roundtrip");
  }
  const fs::path root(o.data);
  if (!fs::exists(root / (o.split + ".json"))) {
    throw DataError("eval: no split '" + o.split + "' under " + root.string());
  }
  const Split split = load_split(root, o.split);

  EvalResult result;
  std::string mode;
  if (!o.checkpoint.empty()) {
    mode = "checkpoint";
    const ToyNet<float> net = load_checkpoint<float>(o.checkpoint);
    result = evaluate(net, split, g.threads);
  } else {
    std::vector<std::vector<Detection>> detections(split.entries.size());
    if (o.oracle) {
      mode = "oracle";
      for (std::size_t i = 0; i < split.entries.size(); ++i) {
        for (const LabeledObject& obj : split.entries[i].objects) {
          detections[i].push_back({obj.class_id, 1.0, obj.ellipse});
        }
      }
    } else if (o.roundtrip) {
      mode = "roundtrip";
      for (std::size_t i = 0; i < split.entries.size(); ++i) {
        const Image& img = split.images[i];
        const std::vector<Annotation> ann = to_annotations(split.entries[i]);
        detections[i] = decode(encode(ann, img.width, img.height), 1, 0.5);
      }
    } else {
      mode = "predictions";
      const std::vector<DatasetEntry> preds = read_annotations(o.predictions);
      for (std::size_t i = 0; i < split.entries.size(); ++i) {
        for (const DatasetEntry& p : preds) {
          if (p.image != split.entries[i].image) continue;
          for (const LabeledObject& obj : p.objects) {
            detections[i].push_back({obj.class_id, obj.score.value_or(1.0), obj.ellipse});
          }
        }
      }
    }
    result = evaluate_detections(detections, split);
  }

  const AggregateReport& agg = result.aggregate;
  out << std::left << std::setw(10) << "Dice_T" << std::setw(10) << "Dice_C" << std::setw(10)
      << "Dice_all"
      << "P_avg" << '\n';
  if (o.per_scene) {
    for (const BiometricReport& r : result.per_scene) {
      print_table_row(out, r.dice_thorax, r.dice_heart, r.dice_all, r.ctr_precision);
    }
    out << std::string(36, '-') << '\n';
  }
  print_table_row(out, agg.dice_thorax, agg.dice_heart, agg.dice_all, agg.p_avg);
  out << "scenes " << agg.count << "  P_avg unclamped " << fmt_fixed(agg.p_avg_unclamped)
      << "  mean |axis error| " << fmt_fixed(agg.axis_abs_error_deg, 2) << " deg\n";

  if (!o.run_dir.empty()) {
    json scenes = json::array();
    for (std::size_t i = 0; i < result.per_scene.size(); ++i) {
      json s = report_json(result.per_scene[i]);
      s["image"] = split.entries[i].image;
      scenes.push_back(std::move(s));
    }
    const json report = {{"mode", mode},
                         {"split", o.split},
                         {"aggregate",
                          {{"count", agg.count},
                           {"Dice_T", agg.dice_thorax},
                           {"Dice_C", agg.dice_heart},
                           {"Dice_all", agg.dice_all},
                           {"P_avg", agg.p_avg},
                           {"P_avg_unclamped", agg.p_avg_unclamped},
                           {"axis_abs_error_deg", agg.axis_abs_error_deg}}},
                         {"scenes", scenes}};
    const fs::path report_path = fs::path(o.run_dir) / "report.json";
    std::ofstream rf(report_path);
    if (!rf) throw DataError("cannot write " + report_path.string());
    rf << report.dump(1) << '\n';
    write_annotations(fs::path(o.run_dir) / "predictions.json", result.predictions);
    spdlog::info("report written to {}", report_path.string());
  }
  return kExitOk;
}

// ---------------------------------------------------------------- fit

int cmd_fit(FitOptions o, std::ostream& out) {
  FitConfig& c = o.config;
  c.target = ellipse_arg(o.target, "--target");
  if (!o.init.empty()) {
    c.init = ellipse_arg(o.init, "--init");
  } else if (o.init_seed) {
    c.init = random_fit_init(c.target, *o.init_seed);
  } else {
    throw InvalidArgument("fit: give --init or --init-seed");
  }
  const FitResult r = fit_ellipse(c);

  if (!o.run_dir.empty()) {
    const fs::path trace_path = fs::path(o.run_dir) / "fit_trace.csv";
    std::ofstream tf(trace_path);
    if (!tf) throw DataError("cannot write " + trace_path.string());
    tf << "step,loss,ellipse_term,iou_term\n";
    tf.precision(12);
    for (const FitStep& s : r.trace) {
      tf << s.step << ',' << s.loss << ',' << s.ellipse_term << ',' << s.iou_term << '\n';
    }
  }
  out << "step      loss          L_E           L_IoU\n";
  for (const FitStep& s : r.trace) {
    const bool last = &s == &r.trace.back();
    if (o.print_every > 0 && (s.step % o.print_every == 0 || last)) {
      out << std::left << std::setw(10) << s.step << std::setw(14) << fmt_fixed(s.loss, 8)
          << std::setw(14) << fmt_fixed(s.ellipse_term, 8) << fmt_fixed(s.iou_term, 8) << '\n';
    }
  }
  const Ellipse& e = r.final_ellipse;
  out << "init   " << c.init.cx << ',' << c.init.cy << ',' << c.init.a << ',' << c.init.b << ','
      << c.init.theta << '\n';
  out << "final  " << e.cx << ',' << e.cy << ',' << e.a << ',' << e.b << ',' << e.theta << '\n';
  out << "steps " << r.trace.back().step << "  converged_step " << r.converged_step
      << "  dice " << fmt_fixed(r.final_dice, 6) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- iou

int cmd_iou(const IouOptions& o, std::ostream& out) {
  const Ellipse e1 = ellipse_arg(o.e1, "--e1");
  const Ellipse e2 = ellipse_arg(o.e2, "--e2");
  if (o.resolution < 64) throw InvalidArgument("iou: --resolution must be >= 64");
  const DiouComponents d = diou_components(e1, e2);
  const double penalty = d.rho2 / d.c2;
  out << std::setprecision(6) << std::fixed;
  out << "rect_iou     " << d.iou << '\n'
      << "ellipse_iou  " << ellipse_iou_oracle(e1, e2, o.resolution) << '\n'
      << "rho2/c2      " << penalty << '\n'
      << "diou_loss    " << diou_loss(e1, e2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- overlay

std::vector<LabeledObject> select_entry(const std::string& file, const std::string& entry,
                                        const fs::path& image_path) {
  if (file.empty()) return {};
  const std::vector<DatasetEntry> entries = read_annotations(file);
  if (!entry.empty()) {
    for (const DatasetEntry& e : entries) {
      if (e.image == entry) return e.objects;
    }
    throw DataError(file + ": no entry for image '" + entry + "'");
  }
  if (entries.size() == 1) return entries.front().objects;
  const std::string image = image_path.generic_string();
  for (const DatasetEntry& e : entries) {
    if (image.size() >= e.image.size() &&
        image.compare(image.size() - e.image.size(), e.image.size(), e.image) == 0) {
      return e.objects;
    }
  }
  throw DataError(file + ": no entry matches " + image + " (use --entry)");
}

int cmd_overlay(const OverlayOptions& o, std::ostream& out) {
  const Image image = read_pgm(o.image);
  const std::vector<LabeledObject> gt = select_entry(o.gt, o.entry, o.image);
  const std::vector<LabeledObject> pred = select_entry(o.pred, o.entry, o.image);
  write_ppm(o.out, render_overlay(image, gt, pred));
  out << "wrote " << o.out << '\n';
  if (!o.svg.empty()) {
    std::ofstream svg(o.svg, std::ios::binary);
    if (!svg) throw DataError("cannot write " + o.svg);
    svg << overlay_svg(image.width, image.height, gt, pred);
    out << "wrote " << o.svg << '\n';
  }
  return kExitOk;
}

void add_weights(CLI::App* cmd, LossWeights& w) {
  cmd->add_option("--lambda-size", w.lambda_size, "Square-length L1 weight")->capture_default_str();
  cmd->add_option("--lambda-off", w.lambda_off, "Offset L1 weight")->capture_default_str();
  cmd->add_option("--lambda-dtheta", w.lambda_delta_theta, "Angle term weight")
      ->capture_default_str();
  cmd->add_option("--lambda-q", w.lambda_q, "Square-detection loss weight")->capture_default_str();
  cmd->add_option("--lambda-e", w.lambda_e, "Ellipse-regression loss weight")
      ->capture_default_str();
  cmd->add_option("--lambda-iou", w.lambda_iou, "DIoU loss weight")->capture_default_str();
  cmd->add_option("--alpha", w.alpha, "Focal loss alpha")->capture_default_str();
  cmd->add_option("--beta", w.beta, "Focal loss beta")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Anchor-free rotated-ellipse detection toolkit", "ellipsedet"};
  app.allow_config_extras(false);
  app.set_config("--config", "", "TOML/INI configuration file; command-line flags override it");
  app.require_subcommand(1);

  GlobalOptions global;
  app.add_option("--threads", global.threads, "Worker threads (1 = fully deterministic)")
      ->capture_default_str()
      ->check(CLI::Range(1, 256));
  app.add_option("--log-level", global.log_level, "trace, debug, info, warn, error, off")
      ->capture_default_str()
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // gen
  GenOptions gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--count", gen.config.count, "Number of scenes")->capture_default_str();
  gen_cmd->add_option("--train-fraction", gen.config.train_fraction, "Training share")
      ->capture_default_str();
  gen_cmd->add_option("--seed", gen.config.master_seed, "Master seed")->capture_default_str();
  SynthRanges& rg = gen.config.ranges;
  gen_cmd->add_option("--width", rg.image_w, "Image width")->capture_default_str();
  gen_cmd->add_option("--height", rg.image_h, "Image height")->capture_default_str();
  gen_cmd->add_option("--thorax-a-min", rg.thorax_a_min)->capture_default_str();
  gen_cmd->add_option("--thorax-a-max", rg.thorax_a_max)->capture_default_str();
  gen_cmd->add_option("--thorax-aspect-min", rg.thorax_aspect_min)->capture_default_str();
  gen_cmd->add_option("--thorax-aspect-max", rg.thorax_aspect_max)->capture_default_str();
  gen_cmd->add_option("--ctr-min", rg.ctr_min)->capture_default_str();
  gen_cmd->add_option("--ctr-max", rg.ctr_max)->capture_default_str();
  gen_cmd->add_option("--heart-aspect-min", rg.heart_aspect_min)->capture_default_str();
  gen_cmd->add_option("--heart-aspect-max", rg.heart_aspect_max)->capture_default_str();
  gen_cmd->add_option("--axis-min", rg.axis_deg_min, "Cardiac axis range, degrees")
      ->capture_default_str();
  gen_cmd->add_option("--axis-max", rg.axis_deg_max)->capture_default_str();
  gen_cmd->add_option("--noise-min", rg.noise_min)->capture_default_str();
  gen_cmd->add_option("--noise-max", rg.noise_max)->capture_default_str();
  gen_cmd->add_option("--shadow-min", rg.shadow_min)->capture_default_str();
  gen_cmd->add_option("--shadow-max", rg.shadow_max)->capture_default_str();

  // train
  TrainOptions tr;
  auto* train_cmd = app.add_subcommand("train", "Train the detector");
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--run-dir", tr.run_dir, "Run directory for checkpoint, history, logs")
      ->required();
  train_cmd->add_option("--epochs", tr.config.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tr.config.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tr.config.learning_rate, "Adam learning rate")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.config.seed)->capture_default_str();
  add_weights(train_cmd, tr.config.weights);
  train_cmd->add_flag("--only-iou", tr.only_iou,
                      "Drop the ellipse-regression terms (lambda-e = 0)");
  train_cmd->add_flag("--no-augment", tr.no_augment, "Disable flip/scale/shift/noise");
  train_cmd->add_option("--iou-attach", tr.iou_attach,
                        "Where the IoU term reads predictions: gt cells or predicted peaks")
      ->capture_default_str()
      ->check(CLI::IsMember({"gt", "peaks"}));
  train_cmd->add_option("--max-train", tr.config.max_train_scenes, "Use at most N training scenes")
      ->capture_default_str();
  train_cmd->add_option("--max-val", tr.config.max_val_scenes, "Use at most N validation scenes")
      ->capture_default_str();
  train_cmd->add_option("--eval-every", tr.config.eval_every, "Validation cadence in epochs")
      ->capture_default_str();

  // eval
  EvalOptions ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate detections against a split");
  eval_cmd->add_option("--data", ev.data, "Dataset directory")->required();
  eval_cmd->add_option("--split", ev.split)->capture_default_str();
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Trained network");
  eval_cmd->add_option("--predictions", ev.predictions, "Prediction annotations file");
  eval_cmd->add_flag("--oracle", ev.oracle, "Score ground truth against itself");
  eval_cmd->add_flag("--roundtrip", ev.roundtrip, "Score encode/decode of the ground truth");
  eval_cmd->add_flag("--per-scene", ev.per_scene, "Print one table row per scene");
  eval_cmd->add_option("--run-dir", ev.run_dir, "Where report.json and predictions.json go");

  // fit
  FitOptions fo;
  auto* fit_cmd = app.add_subcommand("fit", "Fit one ellipse to a target by direct optimisation");
  fit_cmd->add_option("--target", fo.target, "cx,cy,a,b,theta")->required()->delimiter(',');
  fit_cmd->add_option("--init", fo.init, "cx,cy,a,b,theta")->delimiter(',');
  fit_cmd->add_option("--init-seed", fo.init_seed, "Random start inside the extended square");
  fit_cmd->add_option("--steps", fo.config.max_steps)->capture_default_str();
  fit_cmd->add_option("--lr-start", fo.config.lr_start)->capture_default_str();
  fit_cmd->add_option("--lr-end", fo.config.lr_end)->capture_default_str();
  fit_cmd->add_option("--tolerance", fo.config.tolerance)->capture_default_str();
  fit_cmd->add_option("--lambda-e", fo.config.weights.lambda_e)->capture_default_str();
  fit_cmd->add_option("--lambda-iou", fo.config.weights.lambda_iou)->capture_default_str();
  fit_cmd->add_option("--lambda-dtheta", fo.config.weights.lambda_delta_theta)
      ->capture_default_str();
  fit_cmd->add_option("--print-every", fo.print_every)->capture_default_str();
  fit_cmd->add_option("--run-dir", fo.run_dir, "Where fit_trace.csv goes");

  // iou
  IouOptions io;
  auto* iou_cmd = app.add_subcommand("iou", "Compare two ellipses");
  iou_cmd->add_option("--e1", io.e1, "cx,cy,a,b,theta")->required()->delimiter(',');
  iou_cmd->add_option("--e2", io.e2, "cx,cy,a,b,theta")->required()->delimiter(',');
  iou_cmd->add_option("--resolution", io.resolution, "Lattice resolution of the ellipse IoU")
      ->capture_default_str();

  // overlay
  OverlayOptions ov;
  auto* overlay_cmd = app.add_subcommand("overlay", "Draw ellipses over an image");
  overlay_cmd->add_option("--image", ov.image, "Input PGM")->required();
  overlay_cmd->add_option("--gt", ov.gt, "Ground-truth annotations file")->required();
  overlay_cmd->add_option("--pred", ov.pred, "Prediction annotations file");
  overlay_cmd->add_option("--entry", ov.entry, "Annotation entry (image field) to draw");
  overlay_cmd->add_option("--out", ov.out, "Output PPM")->required();
  overlay_cmd->add_option("--svg", ov.svg, "Optional SVG sidecar");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  LogScope log(err, global.log_level);
  try {
    if (gen_cmd->parsed()) {
      prepare_run_dir(gen.out, app, *gen_cmd, log);
      return cmd_gen(gen, global, out);
    }
    if (train_cmd->parsed()) {
      prepare_run_dir(tr.run_dir, app, *train_cmd, log);
      return cmd_train(tr, global, out);
    }
    if (eval_cmd->parsed()) {
      prepare_run_dir(ev.run_dir, app, *eval_cmd, log);
      return cmd_eval(ev, global, out);
    }
    if (fit_cmd->parsed()) {
      prepare_run_dir(fo.run_dir, app, *fit_cmd, log);
      return cmd_fit(fo, out);
    }
    if (iou_cmd->parsed()) {
      prepare_run_dir("", app, *iou_cmd, log);
      return cmd_iou(io, out);
    }
    if (overlay_cmd->parsed()) {
      prepare_run_dir("", app, *overlay_cmd, log);
      return cmd_overlay(ov, out);
    }
  } catch (const InvalidArgument& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const NumericalError& e) {
    spdlog::error("{}", e.what());
    return kExitNumerical;
  } catch (const DataError& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitData;
  }
  return kExitUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace ellipsedet::cli
