#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tabfuse {

enum class FeatureKind { kCategorical, kOrdinal, kNumerical };

std::string kind_name(FeatureKind kind);
FeatureKind kind_from_name(const std::string& name);

struct Feature {
  std::string name;
  FeatureKind kind = FeatureKind::kNumerical;
  /// Category labels. For ordinals the list order is the rank order; empty
  /// for numericals.
  std::vector<std::string> categories;
};

/// Ordered feature list shared by the data loader, the encoders and the
/// models. Immutable once constructed.
class FeatureSchema {
 public:
  FeatureSchema() = default;
  explicit FeatureSchema(std::vector<Feature> features);

  /// Schema CSV: header `name,kind,categories`, categories joined by '|'.
  static FeatureSchema from_csv(const std::string& path);
  void to_csv(const std::string& path) const;

  std::size_t size() const { return features_.size(); }
  const Feature& at(std::size_t i) const { return features_.at(i); }
  const std::vector<Feature>& features() const { return features_; }
  /// Index of a feature by name, -1 when absent.
  int find(const std::string& name) const;

  /// FNV-1a over the canonical serialization; checkpoints store this to
  /// refuse schema drift.
  std::uint64_t hash() const;

 private:
  std::vector<Feature> features_;
};

}  // namespace tabfuse
