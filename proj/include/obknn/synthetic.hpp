#pragma once

// Synthetic classification data for harness experiments and benchmarks.
//
// Geometry: each label gets a mean vector drawn uniformly on the unit
// sphere; instances are the mean plus isotropic Gaussian noise with
// per-coordinate standard deviation `noise`. Train and test instances are
// drawn from the same distribution, so retrieval quality degrades smoothly
// as `noise` grows.
//
// Base distributions: each test instance carries a simulated base-model
// distribution whose argmax equals the true label with probability
// `base_quality` and a uniformly random label otherwise. The distribution
// is a soft peak (softmax of a scaled one-hot) blended with uniform mass:
//
//     P = q * softmax(scale * onehot(y_hat)) + (1 - q) * uniform
//
// so base_quality 0 yields an exactly uniform (uninformative) base and
// base_quality 1 a confident, always-correct one. The peak is deliberately
// gentle so that moderate retrieval evidence can overturn a wrong base
// prediction under interpolation.
//
// Everything is a pure function of the config (see rng.hpp for the
// portable generator), so a seed reproduces the same files anywhere.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "obknn/core.hpp"
#include "obknn/errors.hpp"
#include "obknn/io.hpp"
#include "obknn/rng.hpp"

namespace obknn {

struct SynthConfig {
    std::uint32_t num_labels = 5;
    std::uint32_t dim = 16;
    std::uint32_t per_label = 50;       // train instances per label
    std::uint32_t test_per_label = 0;   // 0 means "same as per_label"
    double noise = 0.5;                 // per-coordinate std around the label mean
    double base_quality = 0.4;          // P(base argmax is correct)
    std::uint64_t seed = 0;

    void validate() const {
        if (num_labels < 2) throw InvalidArgumentError("synthetic: num_labels must be >= 2");
        if (dim < 1) throw InvalidArgumentError("synthetic: dim must be >= 1");
        if (per_label < 1) throw InvalidArgumentError("synthetic: per_label must be >= 1");
        if (!(noise >= 0.0) || !std::isfinite(noise)) {
            throw InvalidArgumentError("synthetic: noise must be finite and >= 0");
        }
        if (!(base_quality >= 0.0 && base_quality <= 1.0)) {
            throw InvalidArgumentError("synthetic: base_quality must lie in [0, 1]");
        }
    }
};

struct SynthData {
    std::vector<Instance> train;
    std::vector<Instance> test;
    std::vector<std::string> labels;
};

namespace detail {

// Peak height of the simulated base distribution: softmax(scale * onehot).
// Kept gentle so a lambda=0.2 interpolation with decisive neighbor
// evidence can flip a wrong base argmax (a steep peak would make the base
// unfixable at small lambda).
inline constexpr double kBasePeakScale = 0.5;

inline std::vector<double> unit_mean(Rng& rng, std::uint32_t dim) {
    while (true) {
        std::vector<double> v(dim);
        double norm_sq = 0.0;
        for (double& x : v) {
            x = gaussian(rng);
            norm_sq += x * x;
        }
        if (norm_sq < 1e-18) continue;  // astronomically unlikely; redraw
        const double inv = 1.0 / std::sqrt(norm_sq);
        for (double& x : v) x *= inv;
        return v;
    }
}

inline std::vector<float> noisy_point(Rng& rng, const std::vector<double>& mean, double noise) {
    std::vector<float> v(mean.size());
    for (std::size_t d = 0; d < mean.size(); ++d) {
        v[d] = static_cast<float>(mean[d] + noise * gaussian(rng));
    }
    return v;
}

inline std::vector<double> simulated_base(Rng& rng, std::uint32_t label,
                                          std::uint32_t num_labels, double quality) {
    std::uint32_t peak = label;
    if (unit_double(rng) >= quality) {
        peak = static_cast<std::uint32_t>(bounded_uint64(rng, num_labels));
    }
    std::vector<double> scores(num_labels, 0.0);
    scores[peak] = kBasePeakScale;
    const std::vector<double> soft = softmax(scores);
    const double uniform = 1.0 / static_cast<double>(num_labels);
    std::vector<double> probs(num_labels);
    for (std::uint32_t i = 0; i < num_labels; ++i) {
        probs[i] = quality * soft[i] + (1.0 - quality) * uniform;
    }
    return probs;
}

}  // namespace detail

inline SynthData generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    const std::uint32_t test_per_label =
        cfg.test_per_label ? cfg.test_per_label : cfg.per_label;

    SynthData data;
    data.labels.reserve(cfg.num_labels);
    for (std::uint32_t l = 0; l < cfg.num_labels; ++l) {
        data.labels.push_back("R" + std::to_string(l));
    }

    Rng rng(cfg.seed);
    std::vector<std::vector<double>> means;
    means.reserve(cfg.num_labels);
    for (std::uint32_t l = 0; l < cfg.num_labels; ++l) {
        means.push_back(detail::unit_mean(rng, cfg.dim));
    }

    for (std::uint32_t l = 0; l < cfg.num_labels; ++l) {
        for (std::uint32_t i = 0; i < cfg.per_label; ++i) {
            Instance inst;
            inst.embedding = detail::noisy_point(rng, means[l], cfg.noise);
            inst.label = data.labels[l];
            data.train.push_back(std::move(inst));
        }
    }
    for (std::uint32_t l = 0; l < cfg.num_labels; ++l) {
        for (std::uint32_t i = 0; i < test_per_label; ++i) {
            Instance inst;
            inst.embedding = detail::noisy_point(rng, means[l], cfg.noise);
            inst.label = data.labels[l];
            inst.base_dist = detail::simulated_base(rng, l, cfg.num_labels, cfg.base_quality);
            data.test.push_back(std::move(inst));
        }
    }
    return data;
}

inline void write_synthetic(const SynthConfig& cfg, const std::string& train_path,
                            const std::string& test_path) {
    const SynthData data = generate_synthetic(cfg);
    write_instances_jsonl(train_path, data.train);
    write_instances_jsonl(test_path, data.test);
}

}  // namespace obknn
