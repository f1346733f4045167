#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qfl/errors.hpp"
#include "qfl/rng.hpp"

namespace qfl::fl {

/// Labeled samples for the dense softmax classifier.
struct Dataset {
    int feature_count = 0;
    int class_count = 0;
    std::vector<double> features;  // row-major, size() == labels.size() * feature_count
    std::vector<int> labels;

    std::int64_t size() const { return static_cast<std::int64_t>(labels.size()); }
    std::span<const double> sample(std::int64_t i) const {
        return {features.data() + i * feature_count, static_cast<std::size_t>(feature_count)};
    }
};

/// One client's local shard. The aggregation weight is sample_count / total.
struct ClientShard {
    int client_id = 0;
    Dataset data;
};

struct ClientWeight {
    std::int64_t samples = 0;
    std::int64_t total = 0;
    double value() const { return double(samples) / double(total); }
};

/// Dense linear layer, o_j = sum_i W[i][j] x_i + b_j, with softmax head.
struct ModelParams {
    int feature_count = 0;
    int class_count = 0;
    std::vector<double> weights;  // row-major feature_count x class_count
    std::vector<double> biases;   // class_count

    static ModelParams zeros(int features, int classes);
    int flat_dim() const { return feature_count * class_count + class_count; }
    std::vector<double> flatten() const;
    static ModelParams from_flat(int features, int classes, std::span<const double> flat);
};

struct GradientSet {
    int feature_count = 0;
    int class_count = 0;
    std::vector<double> d_weights;  // same layout as ModelParams::weights
    std::vector<double> d_biases;

    std::vector<double> flatten() const;
    /// One comma-separated row of the flattened gradient, for debugging dumps.
    std::string to_csv_row() const;
};

/// Softmax class probabilities, computed with max subtraction.
std::vector<double> forward_probs(const ModelParams& params, std::span<const double> x);

struct LossGrads {
    double loss = 0.0;
    GradientSet grads;
};

/// Mean cross-entropy over the batch and its closed-form gradients:
/// dW[i][j] = mean((p_j - y_j) x_i), db[j] = mean(p_j - y_j).
LossGrads loss_and_grads(const ModelParams& params, const Dataset& batch);

/// theta <- theta - alpha * aggregate, optionally wrapping each parameter
/// into (-pi, pi] afterwards.
ModelParams aggregate_update(const ModelParams& params, std::span<const double> aggregate,
                             double alpha, bool wrap_two_pi = false);

struct InversionResult {
    std::vector<double> recovered_x;
    int inferred_label = -1;
};

/// Single-sample gradient inversion: the true class is the unique strict
/// negative minimum of db, and x_i = dW[i][j*] / db[j*] for the best
/// conditioned column j*. Throws InversionInfeasible when all |db| are below
/// tolerance; uses `known_label` when the sign pattern is ambiguous.
InversionResult invert_single_sample(const GradientSet& grads,
                                     std::optional<int> known_label = std::nullopt,
                                     double tolerance = 1e-9);

struct EquationCensus {
    std::int64_t equations = 0;  // n C + C gradient entries
    std::int64_t unknowns = 0;   // B (n + C)
    bool determined = false;
};

EquationCensus batch_equation_census(std::int64_t batch, std::int64_t features,
                                     std::int64_t classes);

/// Best rank-1 factorization attempt dW ~ x r^T for batch gradients. Exact for
/// B = 1; for larger batches it reports the residual so the caller can see the
/// attack degrade. No recovery guarantee.
struct BatchInversionAttempt {
    std::vector<double> candidate_x;
    double relative_residual = 0.0;
};

BatchInversionAttempt attempt_batch_inversion(const GradientSet& grads, int iterations = 200);

// ---------------------------------------------------------------------------
// Synthetic task.

struct BlobSpec {
    int feature_count = 4;
    int class_count = 3;
    double center_scale = 1.0;  // class means drawn from center_scale * N(0, I)
    double noise = 0.6;         // within-class standard deviation
};

/// Isotropic Gaussian class blobs; class means are drawn once from the spec.
Dataset make_blobs(const BlobSpec& spec, std::int64_t samples, Rng& rng);

/// Splits freshly drawn blobs across clients (same mixture for everyone).
std::vector<ClientShard> make_client_shards(const BlobSpec& spec,
                                            std::span<const std::int64_t> samples_per_client,
                                            std::uint64_t seed);

double accuracy(const ModelParams& params, const Dataset& data);

}  // namespace qfl::fl
