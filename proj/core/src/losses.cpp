#include "ellipsedet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "ellipsedet/angles.hpp"
#include "ellipsedet/errors.hpp"

namespace ellipsedet {

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void require_same_shape(const GridMap& a, const GridMap& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": grid shapes differ");
}

struct MaskedCells {
  std::vector<std::pair<int, int>> cells;
};

MaskedCells masked_cells(const GridMap& mask) {
  MaskedCells out;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (mask.at(0, x, y) > 0.5) out.cells.emplace_back(x, y);
    }
  }
  return out;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {lambda_size, lambda_off, lambda_delta_theta, lambda_q, lambda_e, lambda_iou}) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("loss weights must be finite and non-negative");
    }
  }
  if (!(alpha > 0.0) || !(beta > 0.0)) {
    throw InvalidArgument("focal loss alpha and beta must be positive");
  }
}

double LossBreakdown::square_term(const LossWeights& w) const {
  return heatmap + w.lambda_size * size + w.lambda_off * offset;
}

double LossBreakdown::ellipse_term(const LossWeights& w) const {
  return delta_a + delta_b + w.lambda_delta_theta * delta_theta;
}

double focal_heatmap_loss(const GridMap& pred, const GridMap& gt, const LossWeights& weights) {
  require_same_shape(pred, gt, "focal_heatmap_loss");
  const auto p = pred.values();
  const auto y = gt.values();
  int positives = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = std::clamp(p[i], kProbClamp, 1.0 - kProbClamp);
    if (y[i] == 1.0) {
      ++positives;
      sum += std::pow(1.0 - q, weights.alpha) * -std::log(q);
    } else {
      sum += std::pow(1.0 - y[i], weights.beta) * std::pow(q, weights.alpha) * -std::log(1.0 - q);
    }
  }
  if (positives == 0) throw InvalidArgument("focal_heatmap_loss: no positive cells");
  return sum / positives;
}

double l1_map_loss(const GridMap& pred, const GridMap& gt, const GridMap& mask) {
  require_same_shape(pred, gt, "l1_map_loss");
  if (mask.width() != pred.width() || mask.height() != pred.height()) {
    throw InvalidArgument("l1_map_loss: mask shape differs");
  }
  const auto cells = masked_cells(mask);
  if (cells.cells.empty()) throw InvalidArgument("l1_map_loss: empty mask");
  double sum = 0.0;
  for (const auto& [x, y] : cells.cells) {
    for (int c = 0; c < pred.channels(); ++c) sum += std::abs(pred.at(c, x, y) - gt.at(c, x, y));
  }
  return sum / static_cast<double>(cells.cells.size());
}

RegressionLoss ellipse_regression_loss(const EncodedTargets& pred, const EncodedTargets& gt,
                                       const LossWeights& weights) {
  RegressionLoss out;
  out.delta_a = l1_map_loss(pred.delta_a, gt.delta_a, gt.center_mask);
  out.delta_b = l1_map_loss(pred.delta_b, gt.delta_b, gt.center_mask);
  require_same_shape(pred.delta_theta, gt.delta_theta, "ellipse_regression_loss");
  const auto cells = masked_cells(gt.center_mask);
  double sum = 0.0;
  for (const auto& [x, y] : cells.cells) {
    sum += angle_delta(pred.delta_theta.at(0, x, y), gt.delta_theta.at(0, x, y));
  }
  out.delta_theta = sum / static_cast<double>(cells.cells.size());
  out.total = out.delta_a + out.delta_b + weights.lambda_delta_theta * out.delta_theta;
  return out;
}

double iou_loss_batch(std::span<const Ellipse> pred, std::span<const Ellipse> gt) {
  if (pred.size() != gt.size()) throw InvalidArgument("iou_loss_batch: length mismatch");
  if (pred.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += diou_loss(pred[i], gt[i]);
  return sum / static_cast<double>(pred.size());
}

std::vector<IouSite> iou_sites(const EncodedTargets& pred, const EncodedTargets& gt,
                               IouAttachment attach) {
  std::vector<IouSite> sites;
  sites.reserve(gt.centers.size());
  for (const CenterCell& c : gt.centers) {
    IouSite site{c.x, c.y, c.ellipse};
    if (attach == IouAttachment::kPredictedPeaks) {
      double best = -1.0;
      for (int y = 0; y < pred.heatmap.height(); ++y) {
        for (int x = 0; x < pred.heatmap.width(); ++x) {
          if (pred.heatmap.at(c.class_id, x, y) > best) {
            best = pred.heatmap.at(c.class_id, x, y);
            site.x = x;
            site.y = y;
          }
        }
      }
    }
    sites.push_back(site);
  }
  return sites;
}

Ellipse iou_prediction(const EncodedTargets& pred, const IouSite& site) {
  Ellipse e = decode_cell(pred, site.x, site.y);
  e.a = std::max(e.a, kMinIouAxis);
  e.b = std::max(e.b, kMinIouAxis);
  return e;
}

LossBreakdown compose_total(LossBreakdown parts, const LossWeights& weights) {
  parts.total = weights.lambda_q * parts.square_term(weights) +
                weights.lambda_e * parts.ellipse_term(weights) + weights.lambda_iou * parts.iou;
  return parts;
}

LossBreakdown total_loss(const EncodedTargets& pred, const EncodedTargets& gt,
                         const LossWeights& weights, IouAttachment attach) {
  weights.validate();
  LossBreakdown parts;
  parts.heatmap = focal_heatmap_loss(pred.heatmap, gt.heatmap, weights);
  parts.size = l1_map_loss(pred.square_length, gt.square_length, gt.center_mask);
  parts.offset = l1_map_loss(pred.offset, gt.offset, gt.center_mask);
  const RegressionLoss reg = ellipse_regression_loss(pred, gt, weights);
  parts.delta_a = reg.delta_a;
  parts.delta_b = reg.delta_b;
  parts.delta_theta = reg.delta_theta;

  std::vector<Ellipse> predicted;
  std::vector<Ellipse> truth;
  for (const IouSite& site : iou_sites(pred, gt, attach)) {
    predicted.push_back(iou_prediction(pred, site));
    truth.push_back(site.gt);
  }
  parts.iou = iou_loss_batch(predicted, truth);
  return compose_total(parts, weights);
}

std::array<double, 5> diou_gradient(const Ellipse& pred, const Ellipse& gt) {
  std::array<double, 5> grad{};
  const std::array<double, 5> base{pred.cx, pred.cy, pred.a, pred.b, pred.theta};
  for (std::size_t k = 0; k < 5; ++k) {
    const double h = 1e-4 * std::max(1.0, std::abs(base[k]));
    auto at = [&](double delta) {
      std::array<double, 5> p = base;
      p[k] += delta;
      return diou_loss(Ellipse{p[0], p[1], p[2], p[3], p[4]}, gt);
    };
    grad[k] = (at(h) - at(-h)) / (2.0 * h);
  }
  return grad;
}

HeadGradients loss_gradients(const EncodedTargets& pred, const EncodedTargets& gt,
                             const LossWeights& weights, IouAttachment attach) {
  weights.validate();
  require_same_shape(pred.heatmap, gt.heatmap, "loss_gradients");
  const int gw = gt.grid_w();
  const int gh = gt.grid_h();
  HeadGradients g{GridMap(pred.heatmap.channels(), gw, gh), GridMap(2, gw, gh),
                  GridMap(1, gw, gh), GridMap(1, gw, gh), GridMap(1, gw, gh),
                  GridMap(1, gw, gh)};

  // Focal term.
  {
    const auto p = pred.heatmap.values();
    const auto y = gt.heatmap.values();
    auto out = g.heatmap.values();
    int positives = 0;
    for (double v : y) positives += v == 1.0 ? 1 : 0;
    if (positives == 0) throw InvalidArgument("loss_gradients: no positive heatmap cells");
    const double scale = weights.lambda_q / positives;
    const double alpha = weights.alpha;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double q = p[i];
      if (!(q > kProbClamp && q < 1.0 - kProbClamp)) continue;
      double d;
      if (y[i] == 1.0) {
        d = alpha * std::pow(1.0 - q, alpha - 1.0) * std::log(q) - std::pow(1.0 - q, alpha) / q;
      } else {
        d = std::pow(1.0 - y[i], weights.beta) *
            (alpha * std::pow(q, alpha - 1.0) * -std::log(1.0 - q) +
             std::pow(q, alpha) / (1.0 - q));
      }
      out[i] = scale * d;
    }
  }

  // L1 terms at supervised cells.
  const auto cells = masked_cells(gt.center_mask);
  if (cells.cells.empty()) throw InvalidArgument("loss_gradients: empty centre mask");
  const double inv_n = 1.0 / static_cast<double>(cells.cells.size());
  const double w_size = weights.lambda_q * weights.lambda_size * inv_n;
  const double w_off = weights.lambda_q * weights.lambda_off * inv_n;
  const double w_e = weights.lambda_e * inv_n;
  const double w_theta = weights.lambda_e * weights.lambda_delta_theta * inv_n;
  for (const auto& [x, y] : cells.cells) {
    g.square_length.at(0, x, y) +=
        w_size * sign(pred.square_length.at(0, x, y) - gt.square_length.at(0, x, y));
    for (int c = 0; c < 2; ++c) {
      g.offset.at(c, x, y) += w_off * sign(pred.offset.at(c, x, y) - gt.offset.at(c, x, y));
    }
    g.delta_a.at(0, x, y) += w_e * sign(pred.delta_a.at(0, x, y) - gt.delta_a.at(0, x, y));
    g.delta_b.at(0, x, y) += w_e * sign(pred.delta_b.at(0, x, y) - gt.delta_b.at(0, x, y));
    g.delta_theta.at(0, x, y) +=
        w_theta *
        sign(wrapped_difference(pred.delta_theta.at(0, x, y), gt.delta_theta.at(0, x, y)));
  }

  // DIoU term, chained through centre = (cell + offset) * stride,
  // axes = delta * l and theta = dtheta * pi.
  if (weights.lambda_iou > 0.0 && !gt.centers.empty()) {
    const auto sites = iou_sites(pred, gt, attach);
    const double w_iou = weights.lambda_iou / static_cast<double>(sites.size());
    for (const IouSite& site : sites) {
      const int x = site.x;
      const int y = site.y;
      const Ellipse raw = decode_cell(pred, x, y);
      const Ellipse used = iou_prediction(pred, site);
      auto d = diou_gradient(used, site.gt);
      if (raw.a < kMinIouAxis) d[2] = 0.0;
      if (raw.b < kMinIouAxis) d[3] = 0.0;
      const double l = pred.square_length.at(0, x, y);
      const double stride = pred.stride;
      g.offset.at(0, x, y) += w_iou * d[0] * stride;
      g.offset.at(1, x, y) += w_iou * d[1] * stride;
      g.square_length.at(0, x, y) +=
          w_iou * (d[2] * pred.delta_a.at(0, x, y) + d[3] * pred.delta_b.at(0, x, y));
      g.delta_a.at(0, x, y) += w_iou * d[2] * l;
      g.delta_b.at(0, x, y) += w_iou * d[3] * l;
      g.delta_theta.at(0, x, y) += w_iou * d[4] * kPi;
    }
  }
  return g;
}

}  // namespace ellipsedet
