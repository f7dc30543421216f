#pragma once

#include "monet/core.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace monet::nn {

/// Named learnable tensors with matching gradient slots and Adam moment
/// buffers. Iteration order is deterministic (sorted by name).
class ParamStore {
  public:
    struct Entry {
        Mat value;
        Mat grad;
        Mat adam_m;
        Mat adam_v;
    };

    Mat& create(const std::string& name, Eigen::Index rows, Eigen::Index cols);
    bool has(const std::string& name) const { return entries_.count(name) != 0; }

    Mat& value(const std::string& name) { return at(name).value; }
    const Mat& value(const std::string& name) const { return at(name).value; }
    Mat& grad(const std::string& name) { return at(name).grad; }
    Entry& entry(const std::string& name) { return at(name); }

    void zero_grads();
    void fill(double v);
    double grad_norm() const;
    /// Scales all gradients by min(1, max_norm / ||g||). No-op when under.
    void clip_grad_norm(double max_norm);

    std::size_t size() const { return entries_.size(); }
    std::size_t scalar_count() const;

    auto begin() { return entries_.begin(); }
    auto end() { return entries_.end(); }
    auto begin() const { return entries_.begin(); }
    auto end() const { return entries_.end(); }

    std::int64_t adam_step_count = 0;

    /// Binary checkpoint: little-endian container of sorted
    /// (name, shape, row-major values) records. Round trip is bit-exact.
    /// With_optimizer_state adds the Adam moments and step counter as
    /// reserved "#"-prefixed records; load() accepts files with or without.
    void save(const std::string& path, bool with_optimizer_state = false) const;
    static ParamStore load(const std::string& path);

  private:
    Entry& at(const std::string& name);
    const Entry& at(const std::string& name) const;

    std::map<std::string, Entry> entries_;
};

/// Uniform Glorot initialization: weights in +-sqrt(6/(fan_in+fan_out)).
/// The draw is keyed on (seed, name) so values do not depend on creation
/// order.
void glorot_init(ParamStore& params, const std::string& name, std::uint64_t seed);

}  // namespace monet::nn
