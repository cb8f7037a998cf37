#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bitbcnn/tensor.hpp"

namespace bitbcnn {

// Named parameter tensors with a paired gradient slot per parameter.
// Iteration order is always lexicographic by name, so serialization and
// updates are deterministic.
class ParamStore {
public:
    struct Slot {
        Tensor value;
        Tensor grad;
        Tensor velocity;  // allocated on first momentum step
        Tensor adam_m;    // allocated on first adam step
        Tensor adam_v;
        bool trainable = true;
    };

    Tensor& add(const std::string& name, Tensor init, bool trainable = true);

    bool has(const std::string& name) const { return slots_.count(name) != 0; }
    Tensor& value(const std::string& name);
    const Tensor& value(const std::string& name) const;
    Tensor& grad(const std::string& name);
    const Tensor& grad(const std::string& name) const;
    bool trainable(const std::string& name) const;

    void zero_grads();

    // w <- w - lr * v where v = momentum * v + g. Plain SGD when momentum
    // is zero. Throws naming the parameter if any gradient is non-finite.
    void sgd_step(double lr, double momentum = 0.0);

    // Adam update with bias correction. Same gradient validation as
    // sgd_step. Moment estimates live alongside each parameter.
    void adam_step(double lr, double beta1 = 0.9, double beta2 = 0.999,
                   double epsilon = 1e-8);
    std::size_t adam_steps() const { return adam_steps_; }

    std::vector<std::string> names() const;
    std::size_t scalar_count() const;

    std::map<std::string, Slot>& slots() { return slots_; }
    const std::map<std::string, Slot>& slots() const { return slots_; }

private:
    std::map<std::string, Slot> slots_;
    std::size_t adam_steps_ = 0;
};

// Central-difference gradient of an arbitrary scalar function of the store,
// (f(w+h) - f(w-h)) / (2h) per scalar parameter. Used as the independent
// oracle for every analytic gradient in this project. Restores the store to
// its original values before returning.
std::map<std::string, Tensor> finite_difference_gradient(
    const std::function<Scalar(ParamStore&)>& loss_fn, ParamStore& params,
    double step = 1e-5);

}  // namespace bitbcnn
