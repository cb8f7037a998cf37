#include "bitbcnn/param_store.hpp"

#include <cmath>

namespace bitbcnn {

Tensor& ParamStore::add(const std::string& name, Tensor init, bool trainable) {
    if (slots_.count(name)) throw Error("duplicate parameter name: " + name);
    init.check_finite("parameter " + name);
    Slot slot;
    slot.grad = Tensor::zeros(init.shape());
    slot.value = std::move(init);
    slot.trainable = trainable;
    return slots_.emplace(name, std::move(slot)).first->second.value;
}

Tensor& ParamStore::value(const std::string& name) {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw Error("unknown parameter: " + name);
    return it->second.value;
}

const Tensor& ParamStore::value(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw Error("unknown parameter: " + name);
    return it->second.value;
}

Tensor& ParamStore::grad(const std::string& name) {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw Error("unknown parameter: " + name);
    return it->second.grad;
}

const Tensor& ParamStore::grad(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw Error("unknown parameter: " + name);
    return it->second.grad;
}

bool ParamStore::trainable(const std::string& name) const {
    auto it = slots_.find(name);
    if (it == slots_.end()) throw Error("unknown parameter: " + name);
    return it->second.trainable;
}

void ParamStore::zero_grads() {
    for (auto& [name, slot] : slots_) {
        std::fill(slot.grad.values().begin(), slot.grad.values().end(), 0.0);
    }
}

void ParamStore::sgd_step(double lr, double momentum) {
    for (auto& [name, slot] : slots_) {
        if (!slot.trainable) continue;
        for (Scalar g : slot.grad.values()) {
            if (!std::isfinite(g)) throw Error("non-finite gradient for parameter " + name);
        }
        if (momentum != 0.0) {
            if (slot.velocity.size() == 0) slot.velocity = Tensor::zeros(slot.value.shape());
            for (std::size_t i = 0; i < slot.value.size(); ++i) {
                slot.velocity[i] = momentum * slot.velocity[i] + slot.grad[i];
                slot.value[i] -= lr * slot.velocity[i];
            }
        } else {
            for (std::size_t i = 0; i < slot.value.size(); ++i) {
                slot.value[i] -= lr * slot.grad[i];
            }
        }
    }
}

void ParamStore::adam_step(double lr, double beta1, double beta2, double epsilon) {
    adam_steps_ += 1;
    const double correction1 = 1.0 - std::pow(beta1, static_cast<double>(adam_steps_));
    const double correction2 = 1.0 - std::pow(beta2, static_cast<double>(adam_steps_));
    for (auto& [name, slot] : slots_) {
        if (!slot.trainable) continue;
        for (Scalar g : slot.grad.values()) {
            if (!std::isfinite(g)) throw Error("non-finite gradient for parameter " + name);
        }
        if (slot.adam_m.size() == 0) {
            slot.adam_m = Tensor::zeros(slot.value.shape());
            slot.adam_v = Tensor::zeros(slot.value.shape());
        }
        for (std::size_t i = 0; i < slot.value.size(); ++i) {
            const double g = slot.grad[i];
            slot.adam_m[i] = beta1 * slot.adam_m[i] + (1.0 - beta1) * g;
            slot.adam_v[i] = beta2 * slot.adam_v[i] + (1.0 - beta2) * g * g;
            slot.value[i] -= lr * (slot.adam_m[i] / correction1) /
                             (std::sqrt(slot.adam_v[i] / correction2) + epsilon);
        }
    }
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(slots_.size());
    for (const auto& [name, slot] : slots_) out.push_back(name);
    return out;
}

std::size_t ParamStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [name, slot] : slots_) n += slot.value.size();
    return n;
}

std::map<std::string, Tensor> finite_difference_gradient(
    const std::function<Scalar(ParamStore&)>& loss_fn, ParamStore& params, double step) {
    if (step <= 0.0) throw Error("finite difference step must be positive");
    std::map<std::string, Tensor> grads;
    for (auto& [name, slot] : params.slots()) {
        if (!slot.trainable) continue;
        Tensor g = Tensor::zeros(slot.value.shape());
        for (std::size_t i = 0; i < slot.value.size(); ++i) {
            const Scalar saved = slot.value[i];
            slot.value[i] = saved + step;
            const Scalar up = loss_fn(params);
            slot.value[i] = saved - step;
            const Scalar down = loss_fn(params);
            slot.value[i] = saved;
            g[i] = (up - down) / (2.0 * step);
        }
        grads.emplace(name, std::move(g));
    }
    return grads;
}

}  // namespace bitbcnn
