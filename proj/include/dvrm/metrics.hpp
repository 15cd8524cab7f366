#pragma once

#include <string>
#include <vector>

#include "dvrm/common.hpp"
#include "dvrm/image.hpp"

namespace dvrm {

/// Pearson correlation of the flattened pixel vectors. Throws NumericError if
/// both images are constant (correlation undefined).
double pcc(const Image& a, const Image& b);

/// Mean local SSIM over an 11x11 Gaussian window (sigma 1.5), window fully
/// inside the image, C1=(0.01)^2, C2=(0.03)^2, dynamic range L=1.
double ssim(const Image& a, const Image& b);

/// 10*log10(max_val^2 / mse). Identical images give +infinity.
double psnr(const Image& a, const Image& b, double max_val = 1.0);

double mse(const Image& a, const Image& b);

/// Majority vote over the k nearest training vectors (Euclidean). Ties break
/// by smallest summed distance to the query, then by lowest label id.
int knn_classify(const std::vector<std::vector<double>>& train_vecs,
                 const std::vector<int>& train_labels,
                 const std::vector<double>& query, std::size_t k);

struct ConfusionMatrix {
    std::size_t k = 0;
    std::vector<std::size_t> counts; // k x k, rows true, cols predicted

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t classes) : k(classes), counts(classes * classes, 0) {}
    std::size_t& at(std::size_t truth, std::size_t pred) { return counts[truth * k + pred]; }
    std::size_t at(std::size_t truth, std::size_t pred) const { return counts[truth * k + pred]; }
    std::size_t total() const;
    double accuracy() const;
};

struct MetricStat {
    double mean = 0.0, stddev = 0.0;
    std::size_t n = 0;
};

struct PairRow {
    std::string pair_id;
    std::string group;
    double pcc = 0, ssim = 0, psnr_db = 0, mse = 0;
};

struct GroupStats {
    std::string group;
    std::size_t n = 0;
    MetricStat pcc, ssim, psnr, mse;
    std::size_t psnr_inf_count = 0; // infinite rows excluded from the psnr stat
};

/// Per-pair metrics plus per-group and overall aggregates, Table-style.
/// Aggregates are always recomputed from the stored rows. Stddev is the
/// sample (n-1) convention; a single row reports std 0.
struct EvalReport {
    std::vector<PairRow> per_pair;
    std::vector<GroupStats> groups;
    GroupStats average;
};

struct EvalPair {
    std::string pair_id;
    std::string group;
    const Image* target = nullptr;
    const Image* recon = nullptr;
};

EvalReport evaluate(const std::vector<EvalPair>& pairs);

/// Recompute groups+average from report.per_pair (used by evaluate itself and
/// by integrity checks).
void recompute_aggregates(EvalReport& report);

std::string eval_report_csv(const EvalReport& report);
std::string eval_report_table(const EvalReport& report);

} // namespace dvrm
