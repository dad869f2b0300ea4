#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "ellipsedet/biometrics.hpp"
#include "ellipsedet/dataset.hpp"
#include "ellipsedet/detector/net.hpp"
#include "ellipsedet/losses.hpp"
#include "ellipsedet/synth.hpp"

namespace ellipsedet {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 8;
  double learning_rate = 5e-4;
  LossWeights weights;
  std::uint64_t seed = 1;
  std::filesystem::path dataset_dir;
  std::filesystem::path checkpoint_path;  // rewritten after every epoch when set
  std::filesystem::path history_path;     // CSV, rewritten after every epoch when set
  bool augment = true;
  AugmentFlags augment_flags;
  IouAttachment iou_attachment = IouAttachment::kGroundTruthCells;
  NetConfig net;
  int max_train_scenes = 0;  // 0 = all
  int max_val_scenes = 0;    // 0 = all
  int eval_every = 1;        // validation cadence in epochs; the last epoch always runs it
  int threads = 1;           // training and validation workers

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  LossBreakdown train;  // mean over the epoch's images
  AggregateReport val;
  bool has_val = false;
  double seconds = 0.0;
};

struct TrainResult {
  ToyNet<float> net;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Loads <dataset_dir>/train and /test and trains. Throws DataError when the
/// dataset is missing and NumericalError on a non-finite loss.
TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Same loop on already-loaded splits.
TrainResult train(const TrainConfig& config, const Split& train_split, const Split& val_split,
                  const EpochCallback& on_epoch = {});

struct EvalResult {
  std::vector<BiometricReport> per_scene;
  AggregateReport aggregate;
  std::vector<DatasetEntry> predictions;  // top detection per class, with scores
};

/// Scores per-image detections against the split's annotations. A class with
/// no detection counts as dice 0 and CTR precision 0 for that scene.
EvalResult evaluate_detections(const std::vector<std::vector<Detection>>& detections,
                               const Split& split);

/// Runs the network on every image of the split (top-1 per class, no threshold).
EvalResult evaluate(const ToyNet<float>& net, const Split& split, int threads = 1);

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& history);

}  // namespace ellipsedet
