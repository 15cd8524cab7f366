#include "dvrm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

namespace dvrm {

namespace {

void check_pair(const Image& a, const Image& b, const char* op) {
    if (a.h != b.h || a.w != b.w)
        throw ShapeError(std::string(op) + ": image shapes differ: " + std::to_string(a.h) +
                         "x" + std::to_string(a.w) + " vs " + std::to_string(b.h) + "x" +
                         std::to_string(b.w));
    if (a.size() == 0) throw ShapeError(std::string(op) + ": empty image");
}

} // namespace

double pcc(const Image& a, const Image& b) {
    check_pair(a, b, "pcc");
    std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) { ma += a.pix[i]; mb += b.pix[i]; }
    ma /= double(n); mb /= double(n);
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double da = a.pix[i] - ma, db = b.pix[i] - mb;
        sab += da * db; saa += da * da; sbb += db * db;
    }
    if (saa == 0.0 && sbb == 0.0)
        throw NumericError("pcc: both images are constant; correlation undefined");
    if (saa == 0.0 || sbb == 0.0)
        throw NumericError("pcc: one image is constant; correlation undefined");
    return sab / std::sqrt(saa * sbb);
}

double mse(const Image& a, const Image& b) {
    check_pair(a, b, "mse");
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a.pix[i] - b.pix[i];
        s += d * d;
    }
    return s / double(a.size());
}

double psnr(const Image& a, const Image& b, double max_val) {
    if (!(max_val > 0)) throw ParamError("psnr: max_val must be positive");
    double e = mse(a, b);
    if (e == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / e);
}

double ssim(const Image& a, const Image& b) {
    check_pair(a, b, "ssim");
    constexpr std::size_t win = 11;
    constexpr double sigma = 1.5;
    constexpr double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    if (a.h < win || a.w < win)
        throw ShapeError("ssim: image " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                         " is smaller than the 11x11 window");

    double g[win * win];
    double gsum = 0;
    for (std::size_t i = 0; i < win; ++i)
        for (std::size_t j = 0; j < win; ++j) {
            double di = double(i) - 5.0, dj = double(j) - 5.0;
            g[i * win + j] = std::exp(-(di * di + dj * dj) / (2.0 * sigma * sigma));
            gsum += g[i * win + j];
        }
    for (auto& v : g) v /= gsum;

    double acc = 0;
    std::size_t count = 0;
    for (std::size_t i0 = 0; i0 + win <= a.h; ++i0)
        for (std::size_t j0 = 0; j0 + win <= a.w; ++j0) {
            double mua = 0, mub = 0, saa = 0, sbb = 0, sab = 0;
            for (std::size_t i = 0; i < win; ++i)
                for (std::size_t j = 0; j < win; ++j) {
                    double wgt = g[i * win + j];
                    double va = a.at(i0 + i, j0 + j), vb = b.at(i0 + i, j0 + j);
                    mua += wgt * va; mub += wgt * vb;
                    saa += wgt * va * va; sbb += wgt * vb * vb; sab += wgt * va * vb;
                }
            double va = saa - mua * mua, vb = sbb - mub * mub, cov = sab - mua * mub;
            double s = ((2 * mua * mub + c1) * (2 * cov + c2)) /
                       ((mua * mua + mub * mub + c1) * (va + vb + c2));
            acc += s;
            ++count;
        }
    return acc / double(count);
}

int knn_classify(const std::vector<std::vector<double>>& train_vecs,
                 const std::vector<int>& train_labels,
                 const std::vector<double>& query, std::size_t k) {
    if (train_vecs.empty()) throw ParamError("knn_classify: empty training set");
    if (train_vecs.size() != train_labels.size())
        throw ShapeError("knn_classify: vector/label count mismatch");
    if (k < 1 || k > train_vecs.size())
        throw ParamError("knn_classify: k must be in [1, training size]");

    std::vector<std::pair<double, std::size_t>> dist(train_vecs.size());
    for (std::size_t i = 0; i < train_vecs.size(); ++i) {
        if (train_vecs[i].size() != query.size())
            throw ShapeError("knn_classify: training vector " + std::to_string(i) +
                             " has dimension " + std::to_string(train_vecs[i].size()) +
                             ", query has " + std::to_string(query.size()));
        double s = 0;
        for (std::size_t d = 0; d < query.size(); ++d) {
            double diff = train_vecs[i][d] - query[d];
            s += diff * diff;
        }
        dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

    std::map<int, std::pair<std::size_t, double>> votes; // label -> (count, summed dist)
    for (std::size_t t = 0; t < k; ++t) {
        auto& v = votes[train_labels[dist[t].second]];
        v.first += 1;
        v.second += std::sqrt(dist[t].first);
    }
    int best = votes.begin()->first;
    auto best_v = votes.begin()->second;
    for (const auto& [label, v] : votes) {
        if (v.first > best_v.first ||
            (v.first == best_v.first && v.second < best_v.second) ||
            (v.first == best_v.first && v.second == best_v.second && label < best)) {
            best = label;
            best_v = v;
        }
    }
    return best;
}

std::size_t ConfusionMatrix::total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t(0));
}

double ConfusionMatrix::accuracy() const {
    std::size_t t = total();
    if (t == 0) return 0.0;
    std::size_t diag = 0;
    for (std::size_t i = 0; i < k; ++i) diag += at(i, i);
    return double(diag) / double(t);
}

namespace {

MetricStat stat_of(const std::vector<double>& xs) {
    MetricStat s;
    s.n = xs.size();
    if (xs.empty()) return s;
    s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / double(xs.size());
    if (xs.size() > 1) {
        double acc = 0;
        for (double x : xs) acc += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(acc / double(xs.size() - 1));
    }
    return s;
}

GroupStats stats_for(const std::string& name, const std::vector<const PairRow*>& rows) {
    GroupStats g;
    g.group = name;
    g.n = rows.size();
    std::vector<double> vp, vs, vn, vm;
    for (const auto* r : rows) {
        vp.push_back(r->pcc);
        vs.push_back(r->ssim);
        vm.push_back(r->mse);
        if (std::isinf(r->psnr_db)) ++g.psnr_inf_count;
        else vn.push_back(r->psnr_db);
    }
    g.pcc = stat_of(vp);
    g.ssim = stat_of(vs);
    g.psnr = stat_of(vn);
    g.mse = stat_of(vm);
    return g;
}

std::string fmt3(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << v;
    return os.str();
}

std::string fmt_pm(const MetricStat& s, std::size_t inf_count = 0) {
    std::string out = fmt3(s.mean) + "±" + fmt3(s.stddev);
    if (inf_count > 0)
        out += " (" + std::to_string(inf_count) + " inf excluded)";
    return out;
}

} // namespace

void recompute_aggregates(EvalReport& report) {
    report.groups.clear();
    std::vector<std::string> order;
    std::map<std::string, std::vector<const PairRow*>> by_group;
    std::vector<const PairRow*> all;
    for (const auto& r : report.per_pair) {
        if (!by_group.count(r.group)) order.push_back(r.group);
        by_group[r.group].push_back(&r);
        all.push_back(&r);
    }
    for (const auto& name : order) report.groups.push_back(stats_for(name, by_group[name]));
    report.average = stats_for("Average", all);
}

EvalReport evaluate(const std::vector<EvalPair>& pairs) {
    if (pairs.empty()) throw ParamError("evaluate: no image pairs");
    EvalReport rep;
    rep.per_pair.reserve(pairs.size());
    for (const auto& p : pairs) {
        if (!p.target || !p.recon) throw ParamError("evaluate: null image in pair " + p.pair_id);
        PairRow row;
        row.pair_id = p.pair_id;
        row.group = p.group;
        row.pcc = pcc(*p.target, *p.recon);
        row.ssim = ssim(*p.target, *p.recon);
        row.psnr_db = psnr(*p.target, *p.recon);
        row.mse = mse(*p.target, *p.recon);
        rep.per_pair.push_back(std::move(row));
    }
    recompute_aggregates(rep);
    return rep;
}

std::string eval_report_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "pair_id,pcc,ssim,psnr_db,mse\n";
    os.setf(std::ios::fixed);
    os.precision(6);
    for (const auto& r : report.per_pair) {
        os << r.pair_id << "," << r.pcc << "," << r.ssim << ",";
        if (std::isinf(r.psnr_db)) os << "inf";
        else os << r.psnr_db;
        os << "," << r.mse << "\n";
    }
    return os.str();
}

std::string eval_report_table(const EvalReport& report) {
    std::ostringstream os;
    auto row = [&os](const std::string& no, const std::string& stimuli,
                     const std::string& pcc_s, const std::string& ssim_s,
                     const std::string& psnr_s, const std::string& mse_s) {
        os << no;
        os << std::string(no.size() < 5 ? 5 - no.size() : 1, ' ');
        os << stimuli;
        os << std::string(stimuli.size() < 12 ? 12 - stimuli.size() : 1, ' ');
        auto pad = [&os](const std::string& s, std::size_t w) {
            os << s << std::string(s.size() < w ? w - s.size() : 1, ' ');
        };
        pad(pcc_s, 16);
        pad(ssim_s, 16);
        pad(psnr_s, 18);
        os << mse_s << "\n";
    };
    row("No.", "Stimuli", "PCC", "SSIM", "PSNR", "MSE");
    std::size_t i = 1;
    for (const auto& g : report.groups) {
        row(std::to_string(i++), g.group, fmt_pm(g.pcc), fmt_pm(g.ssim),
            fmt_pm(g.psnr, g.psnr_inf_count), fmt_pm(g.mse));
    }
    const auto& a = report.average;
    row("-", "Average", fmt_pm(a.pcc), fmt_pm(a.ssim), fmt_pm(a.psnr, a.psnr_inf_count),
        fmt_pm(a.mse));
    return os.str();
}

} // namespace dvrm
