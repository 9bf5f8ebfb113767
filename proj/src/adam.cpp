#include "gfp/adam.hpp"

#include <cmath>
#include <stdexcept>

#include "gfp/parallel.hpp"

namespace gfp::ad {

std::size_t ParamSet::total_values() const {
  std::size_t n = 0;
  for (const ParamTensor& t : tensors) n += static_cast<std::size_t>(t.value.size());
  return n;
}

void ParamSet::zero_grads() {
  for (ParamTensor& t : tensors) {
    t.grad.setZero(t.value.rows(), t.value.cols());
    t.has_grad = false;
  }
}

void ParamSet::alloc_grads() {
  for (ParamTensor& t : tensors)
    if (t.grad.rows() != t.value.rows() || t.grad.cols() != t.value.cols())
      t.grad.setZero(t.value.rows(), t.value.cols());
}

Adam::Adam(const ParamSet& params, const AdamConfig& cfg) : cfg_(cfg), lr_(cfg.learning_rate) {
  m_.reserve(params.tensors.size());
  v_.reserve(params.tensors.size());
  for (const ParamTensor& t : params.tensors) {
    m_.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
    v_.push_back(Mat::Zero(t.value.rows(), t.value.cols()));
  }
}

void Adam::step(ParamSet& params, int threads) {
  if (params.tensors.size() != m_.size())
    throw std::invalid_argument("adam: parameter set does not match optimizer state");
  for (const ParamTensor& t : params.tensors)
    if (!t.has_grad) throw std::runtime_error("no gradients");

  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  const double inv_bc1 = 1.0 / bc1;
  const double inv_bc2 = 1.0 / bc2;

  // Tensors update independently; expressions are fused so each pass streams
  // the buffers once without temporaries.
  parallel_for(params.tensors.size(), threads, [&](std::size_t i) {
    ParamTensor& t = params.tensors[i];
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * t.grad;
    v_[i].array() = cfg_.beta2 * v_[i].array() +
                    (1.0 - cfg_.beta2) * t.grad.array() * t.grad.array();
    t.value.array() -=
        lr_ * (m_[i].array() * inv_bc1) /
        ((v_[i].array() * inv_bc2).sqrt() + cfg_.epsilon);
    t.grad.setZero();
    t.has_grad = false;
  });
}

}  // namespace gfp::ad
