#include "ellipsedet/detector/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "ellipsedet/detector/adam.hpp"
#include "ellipsedet/errors.hpp"

namespace ellipsedet {

namespace {

Split head(const Split& split, int limit) {
  if (limit <= 0 || limit >= static_cast<int>(split.entries.size())) return split;
  Split out;
  out.entries.assign(split.entries.begin(), split.entries.begin() + limit);
  out.images.assign(split.images.begin(), split.images.begin() + limit);
  return out;
}

bool finite(const LossBreakdown& b) {
  for (double v : {b.heatmap, b.size, b.offset, b.delta_a, b.delta_b, b.delta_theta, b.iou,
                   b.total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void accumulate(LossBreakdown& sum, const LossBreakdown& b, double scale) {
  sum.heatmap += scale * b.heatmap;
  sum.size += scale * b.size;
  sum.offset += scale * b.offset;
  sum.delta_a += scale * b.delta_a;
  sum.delta_b += scale * b.delta_b;
  sum.delta_theta += scale * b.delta_theta;
  sum.iou += scale * b.iou;
  sum.total += scale * b.total;
}

void scale_grads(HeadGradients& g, double s) {
  for (GridMap* m : {&g.heatmap, &g.offset, &g.square_length, &g.delta_a, &g.delta_b,
                     &g.delta_theta}) {
    for (double& v : m->values()) v *= s;
  }
}

BiometricReport score_scene(const std::vector<Detection>& dets, const DatasetEntry& gt,
                            int width, int height) {
  const Ellipse* gt_heart = nullptr;
  const Ellipse* gt_thorax = nullptr;
  for (const LabeledObject& o : gt.objects) {
    if (o.class_id == kHeart) gt_heart = &o.ellipse;
    if (o.class_id == kThorax) gt_thorax = &o.ellipse;
  }
  if (gt_heart == nullptr || gt_thorax == nullptr) {
    throw DataError("evaluation entry " + gt.image + " lacks a heart or thorax annotation");
  }
  const Detection* heart = best_of_class(dets, kHeart);
  const Detection* thorax = best_of_class(dets, kThorax);
  if (heart != nullptr && thorax != nullptr) {
    return evaluate_pair({heart->ellipse, thorax->ellipse}, {*gt_heart, *gt_thorax}, width,
                         height);
  }
  BiometricReport r;
  r.ctr_true = ctr(*gt_heart, *gt_thorax);
  r.cardiac_axis_true_deg = cardiac_axis(*gt_heart, *gt_thorax);
  auto dice_of = [&](const Detection* d, const Ellipse& g) {
    if (d == nullptr) return 0.0;
    return mask_dice(rasterize_ellipse(d->ellipse, width, height),
                     rasterize_ellipse(g, width, height));
  };
  r.dice_heart = dice_of(heart, *gt_heart);
  r.dice_thorax = dice_of(thorax, *gt_thorax);
  r.dice_all = 0.5 * (r.dice_heart + r.dice_thorax);
  r.ctr_precision = 0.0;
  return r;
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw InvalidArgument("train: epochs must be >= 1");
  if (batch_size < 1) throw InvalidArgument("train: batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  if (eval_every < 1) throw InvalidArgument("train: eval_every must be >= 1");
  weights.validate();
}

EvalResult evaluate_detections(const std::vector<std::vector<Detection>>& detections,
                               const Split& split) {
  if (detections.size() != split.entries.size()) {
    throw InvalidArgument("evaluate_detections: one detection list per image expected");
  }
  EvalResult result;
  for (std::size_t i = 0; i < detections.size(); ++i) {
    const Image& img = split.images[i];
    result.per_scene.push_back(score_scene(detections[i], split.entries[i], img.width, img.height));
    DatasetEntry pred{split.entries[i].image, {}};
    for (int c = 0; c < kNumClasses; ++c) {
      if (const Detection* d = best_of_class(detections[i], c)) {
        pred.objects.push_back({c, d->ellipse, d->score});
      }
    }
    result.predictions.push_back(std::move(pred));
  }
  result.aggregate = aggregate(result.per_scene);
  return result;
}

EvalResult evaluate(const ToyNet<float>& net, const Split& split, int threads) {
  const std::size_t n = split.images.size();
  std::vector<std::vector<Detection>> detections(n);
  auto work = [&](std::size_t i) {
    detections[i] = infer(net, split.images[i], 0.0, 1);
  };
  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t i = t; i < n; i += workers) work(i);
      });
    }
  }
  return evaluate_detections(detections, split);
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<EpochRecord>& history) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,heatmap,size,offset,delta_a,delta_b,delta_theta,iou,total,"
         "dice_t,dice_c,dice_all,p_avg\n";
  out.precision(9);
  for (const EpochRecord& r : history) {
    const LossBreakdown& b = r.train;
    out << r.epoch << ',' << b.heatmap << ',' << b.size << ',' << b.offset << ',' << b.delta_a
        << ',' << b.delta_b << ',' << b.delta_theta << ',' << b.iou << ',' << b.total << ',';
    if (r.has_val) {
      out << r.val.dice_thorax << ',' << r.val.dice_heart << ',' << r.val.dice_all << ','
          << r.val.p_avg;
    } else {
      out << ",,,";
    }
    out << '\n';
  }
}

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (config.dataset_dir.empty() || !std::filesystem::exists(config.dataset_dir / "train.json")) {
    throw DataError("train: no dataset at '" + config.dataset_dir.string() + "'");
  }
  const Split train_split = load_split(config.dataset_dir, "train");
  const Split val_split = load_split(config.dataset_dir, "test");
  return train(config, train_split, val_split, on_epoch);
}

TrainResult train(const TrainConfig& config, const Split& train_all, const Split& val_all,
                  const EpochCallback& on_epoch) {
  config.validate();
  const Split train_split = head(train_all, config.max_train_scenes);
  const Split val_split = head(val_all, config.max_val_scenes);
  if (train_split.images.empty()) throw DataError("train: empty training split");

  TrainResult result{ToyNet<float>(config.net, derive_seed(config.seed, 0x7E7)), {}};
  ToyNet<float>& net = result.net;
  auto& params = net.params();
  Adam<float> adam(AdamSettings{config.learning_rate});
  for (const auto& p : params.all()) adam.add_block(p.value.size());

  const std::size_t n = train_split.images.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  // Data-parallel workers each own a copy of the parameters whose values are
  // refreshed before every batch. Gradients are summed worker by worker in a
  // fixed order, so a run is reproducible for a given thread count.
  const int workers = std::max(1, std::min(config.threads, config.batch_size));
  std::vector<nn::ParameterStore<float>> replicas(
      static_cast<std::size_t>(workers > 1 ? workers : 0), params);
  std::vector<LossBreakdown> image_loss(static_cast<std::size_t>(config.batch_size));

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::mt19937_64 shuffle_rng(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    // One image: forward, loss and backward into the tape's parameter store.
    auto run_image = [&](nn::Tape<float>& tape, std::size_t k, double inv_batch) {
      const std::size_t idx = order[k];
      Scene scene{train_split.images[idx], to_annotations(train_split.entries[idx]), {}};
      if (config.augment) {
        const std::uint64_t aug_seed = derive_seed(
            derive_seed(config.seed, 1000003ULL * static_cast<std::uint64_t>(epoch)), idx);
        scene = augment(scene, aug_seed, config.augment_flags);
      }
      const EncodedTargets targets = encode(scene.annotations, scene.image.width,
                                            scene.image.height, kNetStride,
                                            config.net.num_classes);
      tape.clear();
      const auto heads = net.forward(tape, scene.image);
      const EncodedTargets pred = net.read_heads(tape, heads);
      const LossBreakdown loss = total_loss(pred, targets, config.weights, config.iou_attachment);
      if (!finite(loss)) {
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) + " on " +
                             train_split.entries[idx].image);
      }
      HeadGradients grads = loss_gradients(pred, targets, config.weights, config.iou_attachment);
      scale_grads(grads, inv_batch);
      net.backward(tape, heads, grads);
      return loss;
    };

    LossBreakdown epoch_sum;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      const std::size_t count = stop - start;
      const double inv_batch = 1.0 / static_cast<double>(count);
      params.zero_grad();
      if (workers == 1) {
        nn::Tape<float> tape(params);
        for (std::size_t k = start; k < stop; ++k) {
          image_loss[k - start] = run_image(tape, k, inv_batch);
        }
      } else {
        const auto used = std::min(static_cast<std::size_t>(workers), count);
        std::vector<std::exception_ptr> failures(used);
        {
          std::vector<std::jthread> pool;
          for (std::size_t w = 0; w < used; ++w) {
            pool.emplace_back([&, w] {
              try {
                nn::ParameterStore<float>& store = replicas[w];
                for (int p = 0; p < params.size(); ++p) store[p].value = params[p].value;
                store.zero_grad();
                nn::Tape<float> tape(store);
                const std::size_t lo = start + w * count / used;
                const std::size_t hi = start + (w + 1) * count / used;
                for (std::size_t k = lo; k < hi; ++k) {
                  image_loss[k - start] = run_image(tape, k, inv_batch);
                }
              } catch (...) {
                failures[w] = std::current_exception();
              }
            });
          }
        }
        for (const std::exception_ptr& f : failures) {
          if (f) std::rethrow_exception(f);
        }
        for (std::size_t w = 0; w < used; ++w) {
          for (int p = 0; p < params.size(); ++p) {
            auto& dst = params[p].grad;
            const auto& src = replicas[w][p].grad;
            for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
          }
        }
      }
      for (std::size_t k = 0; k < count; ++k) {
        accumulate(epoch_sum, image_loss[k], 1.0 / static_cast<double>(n));
      }
      adam.begin_step();
      for (int p = 0; p < params.size(); ++p) {
        adam.update(static_cast<std::size_t>(p), params[p].value, params[p].grad);
      }
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train = epoch_sum;
    if (!val_split.images.empty() &&
        (epoch % config.eval_every == 0 || epoch == config.epochs)) {
      record.val = evaluate(net, val_split, config.threads).aggregate;
      record.has_val = true;
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(record);

    if (!config.checkpoint_path.empty()) save_checkpoint(net, config.checkpoint_path);
    if (!config.history_path.empty()) write_history_csv(config.history_path, result.history);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

}  // namespace ellipsedet
