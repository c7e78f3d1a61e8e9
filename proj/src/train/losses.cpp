#include <spdlog/spdlog.h>

#include <cmath>

#include "fcgaga/ops.hpp"
#include "fcgaga/train.hpp"

namespace fcgaga {

Tensor masked_mae_loss(const Tensor& forecast, const Tensor& target) {
  if (forecast.shape() != target.shape()) throw ShapeError("masked_mae_loss", forecast.shape(), target.shape());
  std::vector<double> mask(target.numel());
  std::size_t count = 0;
  const auto y = target.values();
  for (std::size_t k = 0; k < mask.size(); ++k) {
    mask[k] = std::abs(y[k]) > kMaskThreshold ? 1.0 : 0.0;
    count += mask[k] != 0.0;
  }
  if (count == 0) {
    spdlog::warn("masked_mae_loss: every target in the batch is masked, loss is 0");
    return Tensor::scalar(0.0);
  }
  const Tensor m(target.shape(), std::move(mask));
  return scale(sum(mul(abs(sub(forecast, target)), m)), 1.0 / static_cast<double>(count));
}

Tensor weight_decay_penalty(const ModelParams& params, double lambda) {
  if (lambda < 0.0) throw std::invalid_argument("weight_decay_penalty: lambda must be >= 0");
  if (lambda == 0.0) return Tensor::scalar(0.0);
  Tensor total;
  for (const auto& p : params.named_parameters()) {
    if (p.kind != ParamKind::kWeight) continue;
    const auto sq = sum(mul(p.tensor, p.tensor));
    total = total.defined() ? add(total, sq) : sq;
  }
  if (!total.defined()) return Tensor::scalar(0.0);
  return scale(total, lambda);
}

}  // namespace fcgaga
