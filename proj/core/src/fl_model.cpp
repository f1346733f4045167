#include "qfl/fl_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace qfl::fl {

ModelParams ModelParams::zeros(int features, int classes) {
    ModelParams p;
    p.feature_count = features;
    p.class_count = classes;
    p.weights.assign(static_cast<std::size_t>(features) * classes, 0.0);
    p.biases.assign(classes, 0.0);
    return p;
}

std::vector<double> ModelParams::flatten() const {
    std::vector<double> flat(weights);
    flat.insert(flat.end(), biases.begin(), biases.end());
    return flat;
}

ModelParams ModelParams::from_flat(int features, int classes, std::span<const double> flat) {
    ModelParams p = zeros(features, classes);
    if (flat.size() != static_cast<std::size_t>(p.flat_dim())) {
        throw DomainError("flat parameter vector has wrong length");
    }
    std::copy_n(flat.begin(), p.weights.size(), p.weights.begin());
    std::copy_n(flat.begin() + p.weights.size(), p.biases.size(), p.biases.begin());
    return p;
}

std::vector<double> GradientSet::flatten() const {
    std::vector<double> flat(d_weights);
    flat.insert(flat.end(), d_biases.begin(), d_biases.end());
    return flat;
}

std::string GradientSet::to_csv_row() const {
    std::ostringstream out;
    out.precision(17);
    bool first = true;
    for (double v : flatten()) {
        if (!first) out << ',';
        out << v;
        first = false;
    }
    return out.str();
}

std::vector<double> forward_probs(const ModelParams& params, std::span<const double> x) {
    if (x.size() != static_cast<std::size_t>(params.feature_count)) {
        throw DomainError("feature vector length mismatch");
    }
    for (double v : x) {
        if (!std::isfinite(v)) throw DomainError("non-finite feature value");
    }
    const int n = params.feature_count;
    const int c = params.class_count;
    std::vector<double> logits(params.biases);
    for (int i = 0; i < n; ++i) {
        const double xi = x[i];
        for (int j = 0; j < c; ++j) logits[j] += params.weights[i * c + j] * xi;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double& l : logits) {
        l = std::exp(l - top);
        denom += l;
    }
    for (double& l : logits) l /= denom;
    return logits;
}

LossGrads loss_and_grads(const ModelParams& params, const Dataset& batch) {
    if (batch.size() == 0) throw DomainError("empty batch");
    if (batch.feature_count != params.feature_count || batch.class_count != params.class_count) {
        throw DomainError("batch shape does not match the model");
    }
    const int n = params.feature_count;
    const int c = params.class_count;
    LossGrads out;
    out.grads.feature_count = n;
    out.grads.class_count = c;
    out.grads.d_weights.assign(static_cast<std::size_t>(n) * c, 0.0);
    out.grads.d_biases.assign(c, 0.0);

    const double inv_b = 1.0 / double(batch.size());
    for (std::int64_t s = 0; s < batch.size(); ++s) {
        const auto x = batch.sample(s);
        const int y = batch.labels[s];
        if (y < 0 || y >= c) throw DomainError("label out of range");
        const std::vector<double> p = forward_probs(params, x);
        out.loss -= std::log(std::max(p[y], 1e-300)) * inv_b;
        for (int j = 0; j < c; ++j) {
            const double r = (p[j] - (j == y ? 1.0 : 0.0)) * inv_b;
            out.grads.d_biases[j] += r;
            for (int i = 0; i < n; ++i) out.grads.d_weights[i * c + j] += r * x[i];
        }
    }
    return out;
}

ModelParams aggregate_update(const ModelParams& params, std::span<const double> aggregate,
                             double alpha, bool wrap_two_pi) {
    if (aggregate.size() != static_cast<std::size_t>(params.flat_dim())) {
        throw DomainError("aggregate length does not match parameter count");
    }
    std::vector<double> flat = params.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i) {
        flat[i] -= alpha * aggregate[i];
        if (wrap_two_pi) {
            flat[i] = std::remainder(flat[i], 2.0 * std::numbers::pi);
        }
    }
    return ModelParams::from_flat(params.feature_count, params.class_count, flat);
}

InversionResult invert_single_sample(const GradientSet& grads, std::optional<int> known_label,
                                     double tolerance) {
    const int n = grads.feature_count;
    const int c = grads.class_count;
    double max_abs = 0.0;
    for (double v : grads.d_biases) max_abs = std::max(max_abs, std::abs(v));
    if (max_abs <= tolerance) {
        throw InversionInfeasible("all bias gradients vanish; gradient is at a critical point");
    }

    InversionResult result;
    // Only the true class has p_y - 1 < 0; every other entry is p_j >= 0.
    const auto min_it = std::min_element(grads.d_biases.begin(), grads.d_biases.end());
    if (*min_it < 0.0) {
        result.inferred_label = static_cast<int>(min_it - grads.d_biases.begin());
    } else if (known_label) {
        result.inferred_label = *known_label;
    } else {
        throw InversionInfeasible("bias gradient sign pattern is ambiguous and no label given");
    }

    // Divide by the best-conditioned column.
    int pivot = 0;
    for (int j = 1; j < c; ++j) {
        if (std::abs(grads.d_biases[j]) > std::abs(grads.d_biases[pivot])) pivot = j;
    }
    result.recovered_x.resize(n);
    const double db = grads.d_biases[pivot];
    for (int i = 0; i < n; ++i) {
        result.recovered_x[i] = grads.d_weights[i * c + pivot] / db;
    }
    return result;
}

EquationCensus batch_equation_census(std::int64_t batch, std::int64_t features,
                                     std::int64_t classes) {
    if (batch < 1 || features < 1 || classes < 1) {
        throw DomainError("census arguments must be positive");
    }
    EquationCensus census;
    census.equations = features * classes + classes;
    census.unknowns = batch * (features + classes);
    census.determined = census.equations >= census.unknowns;
    return census;
}

BatchInversionAttempt attempt_batch_inversion(const GradientSet& grads, int iterations) {
    const int n = grads.feature_count;
    const int c = grads.class_count;
    BatchInversionAttempt attempt;
    attempt.candidate_x.assign(n, 1.0);

    // Power iteration on dW dW^T for the dominant left singular vector.
    std::vector<double> next(n);
    for (int it = 0; it < iterations; ++it) {
        std::vector<double> w(c, 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < c; ++j) w[j] += grads.d_weights[i * c + j] * attempt.candidate_x[i];
        }
        std::fill(next.begin(), next.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < c; ++j) next[i] += grads.d_weights[i * c + j] * w[j];
        }
        double norm = 0.0;
        for (double v : next) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-300) break;
        for (int i = 0; i < n; ++i) attempt.candidate_x[i] = next[i] / norm;
    }

    // Scale so that dW ~ x db^T, matching the B = 1 structure, then report the fit.
    std::vector<double> direction = attempt.candidate_x;
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
            num += grads.d_weights[i * c + j] * direction[i] * grads.d_biases[j];
            den += direction[i] * direction[i] * grads.d_biases[j] * grads.d_biases[j];
        }
    }
    const double scale = den > 1e-300 ? num / den : 0.0;
    for (double& v : attempt.candidate_x) v *= scale;

    double res = 0.0;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < c; ++j) {
            const double predicted = attempt.candidate_x[i] * grads.d_biases[j];
            const double diff = grads.d_weights[i * c + j] - predicted;
            res += diff * diff;
            total += grads.d_weights[i * c + j] * grads.d_weights[i * c + j];
        }
    }
    attempt.relative_residual = total > 1e-300 ? std::sqrt(res / total) : 0.0;
    return attempt;
}

Dataset make_blobs(const BlobSpec& spec, std::int64_t samples, Rng& rng) {
    if (spec.feature_count < 1 || spec.class_count < 2) {
        throw DomainError("blobs need at least one feature and two classes");
    }
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> centers(static_cast<std::size_t>(spec.class_count) * spec.feature_count);
    for (double& v : centers) v = spec.center_scale * gauss(rng);

    Dataset data;
    data.feature_count = spec.feature_count;
    data.class_count = spec.class_count;
    data.features.reserve(samples * spec.feature_count);
    data.labels.reserve(samples);
    std::uniform_int_distribution<int> label_pick(0, spec.class_count - 1);
    for (std::int64_t s = 0; s < samples; ++s) {
        const int y = label_pick(rng);
        data.labels.push_back(y);
        for (int i = 0; i < spec.feature_count; ++i) {
            data.features.push_back(centers[y * spec.feature_count + i] + spec.noise * gauss(rng));
        }
    }
    return data;
}

std::vector<ClientShard> make_client_shards(const BlobSpec& spec,
                                            std::span<const std::int64_t> samples_per_client,
                                            std::uint64_t seed) {
    std::vector<ClientShard> shards;
    shards.reserve(samples_per_client.size());
    // One mixture for the whole federation: centers come from the seed alone,
    // per-client noise from derived streams.
    for (std::size_t k = 0; k < samples_per_client.size(); ++k) {
        Rng center_rng = make_rng(seed, "blob-centers");
        std::normal_distribution<double> gauss(0.0, 1.0);
        std::vector<double> centers(static_cast<std::size_t>(spec.class_count) *
                                    spec.feature_count);
        for (double& v : centers) v = spec.center_scale * gauss(center_rng);

        Rng rng = make_rng(seed, "blob-client", k);
        Dataset data;
        data.feature_count = spec.feature_count;
        data.class_count = spec.class_count;
        std::uniform_int_distribution<int> label_pick(0, spec.class_count - 1);
        std::normal_distribution<double> noise(0.0, 1.0);
        for (std::int64_t s = 0; s < samples_per_client[k]; ++s) {
            const int y = label_pick(rng);
            data.labels.push_back(y);
            for (int i = 0; i < spec.feature_count; ++i) {
                data.features.push_back(centers[y * spec.feature_count + i] +
                                        spec.noise * noise(rng));
            }
        }
        shards.push_back({static_cast<int>(k), std::move(data)});
    }
    return shards;
}

double accuracy(const ModelParams& params, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    std::int64_t hits = 0;
    for (std::int64_t s = 0; s < data.size(); ++s) {
        const std::vector<double> p = forward_probs(params, data.sample(s));
        const int guess = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
        if (guess == data.labels[s]) ++hits;
    }
    return double(hits) / double(data.size());
}

}  // namespace qfl::fl
