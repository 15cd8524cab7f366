#include "dvrm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>

namespace dvrm {

SplitIndices split_dataset(const std::vector<int>& labels, std::array<double, 3> ratios,
                           std::uint64_t seed) {
    double sum = ratios[0] + ratios[1] + ratios[2];
    if (std::abs(sum - 1.0) > 1e-9) throw ParamError("split: ratios must sum to 1");
    for (double r : ratios)
        if (r < 0) throw ParamError("split: ratios must be non-negative");
    if (labels.empty()) throw ParamError("split: empty dataset");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    SplitIndices out;
    for (auto& [cls, idx] : by_class) {
        const std::size_t n = idx.size();
        if (n < 3)
            throw DataError("split: class " + std::to_string(cls) + " has " + std::to_string(n) +
                            " samples; a 3-way split needs at least 3");
        Rng rng(derive_seed(seed, Stream::split, static_cast<std::uint64_t>(cls)));
        rng.shuffle(idx);

        // largest-remainder apportionment; ties favor train, then val
        std::size_t counts[3];
        double rem[3];
        std::size_t assigned = 0;
        for (int k = 0; k < 3; ++k) {
            double exact = ratios[k] * double(n);
            counts[k] = std::size_t(std::floor(exact));
            rem[k] = exact - double(counts[k]);
            assigned += counts[k];
        }
        for (std::size_t left = n - assigned; left > 0; --left) {
            int best = 0;
            for (int k = 1; k < 3; ++k)
                if (rem[k] > rem[best]) best = k;
            ++counts[best];
            rem[best] = -1;
        }

        std::size_t at = 0;
        for (std::size_t i = 0; i < counts[0]; ++i) out.train.push_back(idx[at++]);
        for (std::size_t i = 0; i < counts[1]; ++i) out.val.push_back(idx[at++]);
        for (std::size_t i = 0; i < counts[2]; ++i) out.test.push_back(idx[at++]);
    }
    return out;
}

namespace {

void write_csv(const std::string& path, const char* header, const std::vector<double>& losses) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw DataError("cannot open '" + path + "' for writing");
    std::fprintf(f, "%s\n", header);
    for (std::size_t i = 0; i < losses.size(); ++i)
        std::fprintf(f, "%zu,%.17g\n", i + 1, losses[i]);
    if (std::fclose(f) != 0) throw DataError("write failed for '" + path + "'");
}

} // namespace

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
    write_csv(path, "iteration,loss", losses);
}

void write_val_csv(const std::string& path, const std::vector<double>& losses) {
    write_csv(path, "epoch,val_loss", losses);
}

} // namespace dvrm
