#include "nudgekit/ml/classifier.hpp"

#include "nudgekit/errors.hpp"
#include "nudgekit/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace nudgekit::ml {

using nlohmann::json;

const char* to_string(ClassifierKind k) {
    switch (k) {
        case ClassifierKind::tree: return "tree";
        case ClassifierKind::forest: return "forest";
        case ClassifierKind::knn: return "knn";
    }
    return "forest";
}

ClassifierKind classifier_kind_from_string(const std::string& s) {
    if (s == "tree") return ClassifierKind::tree;
    if (s == "forest") return ClassifierKind::forest;
    if (s == "knn") return ClassifierKind::knn;
    throw ConfigError("unknown classifier kind: '" + s + "'");
}

double Tree::predict(std::span<const double> x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(i)];
        double v = x[static_cast<std::size_t>(n.feature)];
        bool left = is_absent(v) ? n.missing_left : v < n.threshold;
        i = left ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].leaf_p;
}

int Tree::depth() const {
    // iterative: depth of node = depth of parent + 1
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const TreeNode& n = nodes[i];
        if (n.feature < 0) continue;
        d[static_cast<std::size_t>(n.left)] = d[i] + 1;
        d[static_cast<std::size_t>(n.right)] = d[i] + 1;
        best = std::max(best, d[i] + 1);
    }
    return best;
}

namespace {

// Feature values pre-binned against sorted cut points: code = number of
// cuts <= v, so "v < cuts[j]" is exactly "code <= j". Missing = kMissingCode.
constexpr std::uint16_t kMissingCode = 0xFFFF;
constexpr std::size_t kMaxCuts = 255;

struct BinnedFeature {
    std::vector<double> cuts;
    std::vector<std::uint16_t> codes; // per training row
};

BinnedFeature bin_feature(const std::vector<Row>& rows, std::size_t f) {
    BinnedFeature b;
    std::vector<double> vals;
    vals.reserve(rows.size());
    for (const Row& r : rows) {
        if (!is_absent(r.features[f])) vals.push_back(r.features[f]);
    }
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    if (vals.size() >= 2) {
        if (vals.size() - 1 <= kMaxCuts) {
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                b.cuts.push_back(vals[i] + (vals[i + 1] - vals[i]) / 2.0);
            }
        } else {
            for (std::size_t j = 1; j <= kMaxCuts; ++j) {
                b.cuts.push_back(vals[j * vals.size() / (kMaxCuts + 1)]);
            }
            b.cuts.erase(std::unique(b.cuts.begin(), b.cuts.end()), b.cuts.end());
        }
    }
    b.codes.resize(rows.size(), kMissingCode);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        double v = rows[i].features[f];
        if (is_absent(v)) continue;
        b.codes[i] = static_cast<std::uint16_t>(
            std::upper_bound(b.cuts.begin(), b.cuts.end(), v) - b.cuts.begin());
    }
    return b;
}

struct TreeFitter {
    const std::vector<Row>& rows;
    const std::vector<BinnedFeature>& bins;
    const ClassifierSpec& spec;
    int features_per_split;
    Rng* rng; // null -> consider every feature, in index order
    Tree tree;

    std::vector<std::size_t> feature_scratch;

    int build(std::vector<std::uint32_t>& idx, int depth) {
        int pos = 0;
        for (std::uint32_t i : idx) pos += rows[i].label;
        int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        TreeNode& placeholder = tree.nodes.back();
        placeholder.count = static_cast<std::int32_t>(idx.size());
        placeholder.leaf_p = idx.empty() ? 0.0 : static_cast<double>(pos) / idx.size();

        if (depth >= spec.max_depth || pos == 0 || pos == static_cast<int>(idx.size()) ||
            static_cast<int>(idx.size()) < 2 * spec.min_leaf) {
            return node_id;
        }

        pick_features();
        int best_f = -1;
        std::uint16_t best_cut = 0;
        double best_score = std::numeric_limits<double>::infinity();
        const double parent_impurity = gini(pos, static_cast<int>(idx.size()) - pos);

        for (std::size_t f : feature_scratch) {
            const auto& codes = bins[f].codes;
            const std::size_t n_bins = bins[f].cuts.size() + 1;
            if (n_bins < 2) continue;
            // histogram of (bin, label) for non-missing rows of this node
            hist_.assign(n_bins * 2, 0);
            int miss_n = 0;
            for (std::uint32_t i : idx) {
                std::uint16_t c = codes[i];
                if (c == kMissingCode) {
                    ++miss_n;
                } else {
                    ++hist_[c * 2 + static_cast<std::size_t>(rows[i].label)];
                }
            }
            const int n_known = static_cast<int>(idx.size()) - miss_n;
            if (n_known < 2 * spec.min_leaf) continue;
            int lp = 0, ln = 0;
            int tot_p = 0;
            for (std::size_t b = 0; b < n_bins; ++b) tot_p += hist_[b * 2 + 1];
            for (std::size_t j = 0; j + 1 < n_bins; ++j) {
                ln += hist_[j * 2 + 0];
                lp += hist_[j * 2 + 1];
                int nl = ln + lp;
                int nr = n_known - nl;
                if (nl < spec.min_leaf || nr < spec.min_leaf) continue;
                int rp = tot_p - lp;
                int rn = nr - rp;
                double score = (nl * gini(lp, ln) + nr * gini(rp, rn)) /
                               static_cast<double>(n_known);
                if (score < best_score - 1e-12) {
                    best_score = score;
                    best_f = static_cast<int>(f);
                    best_cut = static_cast<std::uint16_t>(j);
                }
            }
        }

        if (best_f < 0 || best_score >= parent_impurity - 1e-12) return node_id;

        const auto& codes = bins[static_cast<std::size_t>(best_f)].codes;
        std::vector<std::uint32_t> left_idx, right_idx;
        int nl_known = 0, nr_known = 0;
        for (std::uint32_t i : idx) {
            if (codes[i] == kMissingCode) continue;
            (codes[i] <= best_cut ? nl_known : nr_known)++;
        }
        const bool missing_left = nl_known >= nr_known;
        for (std::uint32_t i : idx) {
            bool left = codes[i] == kMissingCode ? missing_left : codes[i] <= best_cut;
            (left ? left_idx : right_idx).push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        int left_id = build(left_idx, depth + 1);
        int right_id = build(right_idx, depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.feature = best_f;
        node.threshold = bins[static_cast<std::size_t>(best_f)].cuts[best_cut];
        node.missing_left = missing_left;
        node.left = left_id;
        node.right = right_id;
        return node_id;
    }

    void pick_features() {
        const std::size_t n_feat = bins.size();
        feature_scratch.clear();
        if (!rng || features_per_split >= static_cast<int>(n_feat)) {
            for (std::size_t f = 0; f < n_feat; ++f) feature_scratch.push_back(f);
            return;
        }
        // partial Fisher-Yates over [0, n_feat)
        pool_.resize(n_feat);
        for (std::size_t f = 0; f < n_feat; ++f) pool_[f] = f;
        for (int pick = 0; pick < features_per_split; ++pick) {
            std::size_t j = static_cast<std::size_t>(
                rng->uniform_int(pick, static_cast<std::int64_t>(n_feat) - 1));
            std::swap(pool_[static_cast<std::size_t>(pick)], pool_[j]);
            feature_scratch.push_back(pool_[static_cast<std::size_t>(pick)]);
        }
        std::sort(feature_scratch.begin(), feature_scratch.end());
    }

    static double gini(int p, int n) {
        double tot = p + n;
        if (tot <= 0.0) return 0.0;
        double fp = p / tot, fn = n / tot;
        return 1.0 - fp * fp - fn * fn;
    }

    std::vector<int> hist_;
    std::vector<std::size_t> pool_;
};

Tree fit_tree(const std::vector<Row>& rows, const std::vector<BinnedFeature>& bins,
              const ClassifierSpec& spec, std::vector<std::uint32_t> idx, int features_per_split,
              Rng* rng) {
    TreeFitter fitter{rows, bins, spec, features_per_split, rng, {}, {}, {}, {}};
    fitter.build(idx, 0);
    return std::move(fitter.tree);
}

std::uint64_t dataset_fingerprint(const Dataset& ds) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
        h ^= v;
        h *= 0x100000001b3ull;
    };
    mix(ds.rows.size());
    mix(ds.n_features());
    for (const Row& r : ds.rows) {
        mix(static_cast<std::uint64_t>(r.label));
        for (double f : r.features) {
            std::uint64_t bits = 0;
            if (!is_absent(f)) std::memcpy(&bits, &f, sizeof(bits));
            mix(bits);
        }
    }
    return h;
}

} // namespace

Model Model::fit(const Dataset& ds, const ClassifierSpec& spec, std::uint64_t seed) {
    if (!ds.trainable()) {
        throw DataError("training requires >= 2 rows with both labels present");
    }
    bool any_usable = false;
    for (std::size_t f = 0; f < ds.n_features() && !any_usable; ++f) {
        for (const Row& r : ds.rows) {
            if (!is_absent(r.features[f])) {
                any_usable = true;
                break;
            }
        }
    }
    if (!any_usable) throw DataError("no usable features: every entry is absent");

    Model m;
    m.spec_ = spec;
    m.n_features_ = ds.n_features();
    m.fingerprint_ = dataset_fingerprint(ds);

    if (spec.kind == ClassifierKind::knn) {
        const std::size_t nf = ds.n_features();
        m.feat_median_.assign(nf, 0.0);
        std::vector<double> col;
        for (std::size_t f = 0; f < nf; ++f) {
            col.clear();
            for (const Row& r : ds.rows) {
                if (!is_absent(r.features[f])) col.push_back(r.features[f]);
            }
            if (!col.empty()) {
                std::sort(col.begin(), col.end());
                std::size_t mid = col.size() / 2;
                m.feat_median_[f] =
                    col.size() % 2 ? col[mid] : (col[mid - 1] + col[mid]) / 2.0;
            }
        }
        m.feat_min_.assign(nf, 0.0);
        m.feat_max_.assign(nf, 0.0);
        for (std::size_t f = 0; f < nf; ++f) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (const Row& r : ds.rows) {
                double v = is_absent(r.features[f]) ? m.feat_median_[f] : r.features[f];
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            m.feat_min_[f] = lo;
            m.feat_max_[f] = hi;
        }
        m.knn_rows_.reserve(ds.rows.size());
        m.knn_labels_.reserve(ds.rows.size());
        for (const Row& r : ds.rows) {
            std::vector<double> x(nf);
            for (std::size_t f = 0; f < nf; ++f) {
                double v = is_absent(r.features[f]) ? m.feat_median_[f] : r.features[f];
                double span = m.feat_max_[f] - m.feat_min_[f];
                x[f] = span > 0.0 ? (v - m.feat_min_[f]) / span : 0.0;
            }
            m.knn_rows_.push_back(std::move(x));
            m.knn_labels_.push_back(r.label);
        }
        return m;
    }

    std::vector<BinnedFeature> bins(ds.n_features());
    for (std::size_t f = 0; f < ds.n_features(); ++f) bins[f] = bin_feature(ds.rows, f);

    if (spec.kind == ClassifierKind::tree) {
        std::vector<std::uint32_t> idx(ds.rows.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<std::uint32_t>(i);
        m.trees_.push_back(fit_tree(ds.rows, bins, spec,
                                    std::move(idx), static_cast<int>(ds.n_features()), nullptr));
        return m;
    }

    // forest: seeded bootstrap bagging + per-split random feature subsets
    int fps = spec.features_per_split > 0
                  ? spec.features_per_split
                  : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(ds.n_features()))));
    fps = std::min<int>(fps, static_cast<int>(ds.n_features()));
    Rng root(seed);
    const std::size_t bag =
        std::max<std::size_t>(1, static_cast<std::size_t>(
                                     std::llround(spec.bag_fraction *
                                                  static_cast<double>(ds.rows.size()))));
    for (int t = 0; t < spec.n_trees; ++t) {
        Rng tree_rng = root.substream("tree", static_cast<std::uint64_t>(t));
        std::vector<std::uint32_t> idx(bag);
        for (auto& i : idx) {
            i = static_cast<std::uint32_t>(
                tree_rng.uniform_int(0, static_cast<std::int64_t>(ds.rows.size()) - 1));
        }
        m.trees_.push_back(fit_tree(ds.rows, bins, spec, std::move(idx), fps, &tree_rng));
    }
    return m;
}

double Model::predict_proba(std::span<const double> x) const {
    if (x.size() != n_features_) {
        throw DataError("feature arity mismatch: got " + std::to_string(x.size()) + ", expected " +
                        std::to_string(n_features_));
    }
    if (spec_.kind == ClassifierKind::knn) {
        std::vector<double> q(n_features_);
        for (std::size_t f = 0; f < n_features_; ++f) {
            double v = is_absent(x[f]) ? feat_median_[f] : x[f];
            double span = feat_max_[f] - feat_min_[f];
            q[f] = span > 0.0 ? (v - feat_min_[f]) / span : 0.0;
        }
        std::vector<std::pair<double, std::size_t>> d;
        d.reserve(knn_rows_.size());
        for (std::size_t i = 0; i < knn_rows_.size(); ++i) {
            double s = 0.0;
            for (std::size_t f = 0; f < n_features_; ++f) {
                double diff = q[f] - knn_rows_[i][f];
                s += diff * diff;
            }
            d.push_back({s, i});
        }
        std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, spec_.k)),
                                              d.size());
        std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
        int pos = 0;
        for (std::size_t i = 0; i < k; ++i) pos += knn_labels_[d[i].second];
        return static_cast<double>(pos) / static_cast<double>(k);
    }
    double sum = 0.0;
    for (const Tree& t : trees_) sum += t.predict(x);
    return trees_.empty() ? 0.0 : sum / static_cast<double>(trees_.size());
}

std::string Model::to_json() const {
    json j;
    j["format_version"] = 1;
    j["kind"] = to_string(spec_.kind);
    j["n_features"] = n_features_;
    j["fingerprint"] = fingerprint_;
    j["params"] = {{"max_depth", spec_.max_depth},   {"min_leaf", spec_.min_leaf},
                   {"n_trees", spec_.n_trees},       {"bag_fraction", spec_.bag_fraction},
                   {"features_per_split", spec_.features_per_split}, {"k", spec_.k}};
    if (spec_.kind == ClassifierKind::knn) {
        j["knn"] = {{"min", feat_min_},
                    {"max", feat_max_},
                    {"median", feat_median_},
                    {"rows", knn_rows_},
                    {"labels", knn_labels_}};
    } else {
        json trees = json::array();
        for (const Tree& t : trees_) {
            json nodes = json::array();
            for (const TreeNode& n : t.nodes) {
                nodes.push_back(json::array(
                    {n.feature, n.threshold, n.missing_left, n.left, n.right, n.leaf_p, n.count}));
            }
            trees.push_back({{"nodes", nodes}});
        }
        j["trees"] = std::move(trees);
    }
    return j.dump();
}

Model Model::from_json(const std::string& text) {
    json j = json::parse(text);
    if (j.value("format_version", 0) != 1) throw DataError("unsupported model format version");
    Model m;
    m.spec_.kind = classifier_kind_from_string(j.at("kind").get<std::string>());
    m.n_features_ = j.at("n_features").get<std::size_t>();
    m.fingerprint_ = j.value("fingerprint", 0ull);
    const json& p = j.at("params");
    m.spec_.max_depth = p.at("max_depth").get<int>();
    m.spec_.min_leaf = p.at("min_leaf").get<int>();
    m.spec_.n_trees = p.at("n_trees").get<int>();
    m.spec_.bag_fraction = p.at("bag_fraction").get<double>();
    m.spec_.features_per_split = p.at("features_per_split").get<int>();
    m.spec_.k = p.at("k").get<int>();
    if (m.spec_.kind == ClassifierKind::knn) {
        const json& k = j.at("knn");
        m.feat_min_ = k.at("min").get<std::vector<double>>();
        m.feat_max_ = k.at("max").get<std::vector<double>>();
        m.feat_median_ = k.at("median").get<std::vector<double>>();
        m.knn_rows_ = k.at("rows").get<std::vector<std::vector<double>>>();
        m.knn_labels_ = k.at("labels").get<std::vector<int>>();
    } else {
        for (const json& jt : j.at("trees")) {
            Tree t;
            for (const json& jn : jt.at("nodes")) {
                TreeNode n;
                n.feature = jn.at(0).get<int>();
                n.threshold = jn.at(1).get<double>();
                n.missing_left = jn.at(2).get<bool>();
                n.left = jn.at(3).get<std::int32_t>();
                n.right = jn.at(4).get<std::int32_t>();
                n.leaf_p = jn.at(5).get<double>();
                n.count = jn.at(6).get<std::int32_t>();
                t.nodes.push_back(n);
            }
            m.trees_.push_back(std::move(t));
        }
    }
    return m;
}

Model make_forest_for_test(std::vector<Tree> trees, std::size_t n_features) {
    Model m;
    m.spec_.kind = ClassifierKind::forest;
    m.spec_.n_trees = static_cast<int>(trees.size());
    m.n_features_ = n_features;
    m.trees_ = std::move(trees);
    return m;
}

} // namespace nudgekit::ml
