#pragma once

#include "mbnf/common.hpp"

namespace mbnf {

/// One (s, a, s', r) tuple. Actions are stored as the raw policy output in
/// [-1,1]^d; the environment applies the integer scaling.
struct TransitionSample {
    Vec s;
    Vec a;
    Vec s_next;
    double r = 0.0;
    bool done = false;
    bool model_generated = false;
    int t = 0; // time index of s in the price table
};

enum class BufferKind { Env, Model };

/// FIFO ring buffer with uniform batch sampling without replacement.
class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity, BufferKind kind = BufferKind::Env)
        : capacity_(capacity), kind_(kind) {
        if (capacity == 0) throw std::invalid_argument("buffer capacity must be positive");
    }

    void push(TransitionSample sample) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(sample));
        } else {
            data_[head_] = std::move(sample);
            head_ = (head_ + 1) % capacity_;
        }
    }

    size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }
    BufferKind kind() const { return kind_; }
    const TransitionSample& at(size_t i) const { return data_[i]; }

    /// min(n, size) distinct samples, uniformly without replacement.
    std::vector<const TransitionSample*> sample(size_t n, Rng& rng) const {
        const size_t take = std::min(n, data_.size());
        std::vector<size_t> idx(data_.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::vector<const TransitionSample*> out;
        out.reserve(take);
        for (size_t i = 0; i < take; ++i) {
            const size_t j = i + static_cast<size_t>(rng.uniform_int(static_cast<int>(idx.size() - i)));
            std::swap(idx[i], idx[j]);
            out.push_back(&data_[idx[i]]);
        }
        return out;
    }

    /// Exactly n draws with replacement (rollout start states keep their
    /// batch size even while the buffer is still small).
    std::vector<const TransitionSample*> sample_with_replacement(size_t n, Rng& rng) const {
        std::vector<const TransitionSample*> out;
        out.reserve(n);
        for (size_t i = 0; i < n; ++i)
            out.push_back(&data_[static_cast<size_t>(rng.uniform_int(static_cast<int>(data_.size())))]);
        return out;
    }

private:
    size_t capacity_;
    BufferKind kind_;
    size_t head_ = 0;
    std::vector<TransitionSample> data_;
};

} // namespace mbnf
