#pragma once

#include "nudgekit/ml/dataset.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nudgekit::ml {

enum class ClassifierKind { tree, forest, knn };

const char* to_string(ClassifierKind k);
ClassifierKind classifier_kind_from_string(const std::string& s);

struct ClassifierSpec {
    ClassifierKind kind = ClassifierKind::forest;
    // tree / forest
    int max_depth = 12;
    int min_leaf = 2;
    // forest
    int n_trees = 25;
    double bag_fraction = 1.0;
    int features_per_split = 0; // 0 -> ceil(sqrt(n_features))
    // knn
    int k = 6;

    static ClassifierSpec tree_default() { return {ClassifierKind::tree}; }
    static ClassifierSpec forest_default() { return {ClassifierKind::forest}; }
    static ClassifierSpec knn_default() {
        ClassifierSpec s;
        s.kind = ClassifierKind::knn;
        return s;
    }
};

struct TreeNode {
    int feature = -1;       // -1 for leaves
    double threshold = 0.0; // go left when x < threshold
    bool missing_left = true;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double leaf_p = 0.0; // positive fraction at this node
    std::int32_t count = 0;
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
    double predict(std::span<const double> x) const;
    int depth() const;
};

// Fitted model. Deterministic given (training data, spec, seed).
class Model {
public:
    Model() = default;

    static Model fit(const Dataset& ds, const ClassifierSpec& spec, std::uint64_t seed);

    double predict_proba(std::span<const double> x) const;

    const ClassifierSpec& spec() const { return spec_; }
    ClassifierKind kind() const { return spec_.kind; }
    std::size_t n_features() const { return n_features_; }
    const std::vector<Tree>& trees() const { return trees_; }
    std::uint64_t training_fingerprint() const { return fingerprint_; }

    // Versioned JSON document (kind, parameters, tree structures).
    std::string to_json() const;
    static Model from_json(const std::string& text);

private:
    ClassifierSpec spec_;
    std::size_t n_features_ = 0;
    std::uint64_t fingerprint_ = 0;

    // tree / forest
    std::vector<Tree> trees_;

    // knn: rows stored min-max normalized, absents imputed with the
    // training median (pre-normalization)
    std::vector<double> feat_min_, feat_max_, feat_median_;
    std::vector<std::vector<double>> knn_rows_;
    std::vector<int> knn_labels_;

    friend Model make_forest_for_test(std::vector<Tree> trees, std::size_t n_features);
};

// Test hook: assemble a forest from explicit trees (vote-counting fixtures).
Model make_forest_for_test(std::vector<Tree> trees, std::size_t n_features);

} // namespace nudgekit::ml
