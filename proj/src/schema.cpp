#include "tabfuse/schema.hpp"

#include <set>
#include <sstream>

#include "tabfuse/csv.hpp"
#include "tabfuse/errors.hpp"
#include "tabfuse/rng.hpp"

namespace tabfuse {

std::string kind_name(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kCategorical:
      return "categorical";
    case FeatureKind::kOrdinal:
      return "ordinal";
    case FeatureKind::kNumerical:
      return "numerical";
  }
  throw ArgumentError("kind_name: unknown feature kind");
}

FeatureKind kind_from_name(const std::string& name) {
  if (name == "categorical") return FeatureKind::kCategorical;
  if (name == "ordinal") return FeatureKind::kOrdinal;
  if (name == "numerical") return FeatureKind::kNumerical;
  throw DataError("schema: unknown feature kind '" + name + "'");
}

namespace {

void validate(const std::vector<Feature>& features) {
  std::set<std::string> seen;
  for (const Feature& f : features) {
    if (f.name.empty()) {
      throw DataError("schema: empty feature name");
    }
    if (!seen.insert(f.name).second) {
      throw DataError("schema: duplicate feature name '" + f.name + "'");
    }
    if (f.kind == FeatureKind::kNumerical) {
      if (!f.categories.empty()) {
        throw DataError("schema: numerical feature '" + f.name +
                        "' must not list categories");
      }
    } else {
      if (f.categories.size() < 2) {
        throw DataError("schema: feature '" + f.name +
                        "' needs at least two categories");
      }
      std::set<std::string> cats;
      for (const std::string& c : f.categories) {
        if (c.empty() || !cats.insert(c).second) {
          throw DataError("schema: feature '" + f.name +
                          "' has an empty or duplicate category");
        }
      }
    }
  }
}

std::vector<std::string> split_pipe(const std::string& joined) {
  std::vector<std::string> out;
  if (joined.empty()) return out;
  std::string cur;
  for (char ch : joined) {
    if (ch == '|') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

FeatureSchema::FeatureSchema(std::vector<Feature> features)
    : features_(std::move(features)) {
  validate(features_);
}

FeatureSchema FeatureSchema::from_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header != std::vector<std::string>{"name", "kind", "categories"}) {
    throw DataError("schema " + path +
                    ": header must be name,kind,categories");
  }
  std::vector<Feature> features;
  for (const auto& row : table.rows) {
    Feature f;
    f.name = row[0];
    f.kind = kind_from_name(row[1]);
    f.categories = split_pipe(row[2]);
    features.push_back(std::move(f));
  }
  if (features.empty()) {
    throw DataError("schema " + path + ": no features");
  }
  return FeatureSchema(std::move(features));
}

void FeatureSchema::to_csv(const std::string& path) const {
  CsvTable table;
  table.header = {"name", "kind", "categories"};
  for (const Feature& f : features_) {
    std::string joined;
    for (std::size_t i = 0; i < f.categories.size(); ++i) {
      if (i > 0) joined.push_back('|');
      joined += f.categories[i];
    }
    table.rows.push_back({f.name, kind_name(f.kind), joined});
  }
  write_csv(path, table);
}

int FeatureSchema::find(const std::string& name) const {
  for (std::size_t i = 0; i < features_.size(); ++i) {
    if (features_[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

std::uint64_t FeatureSchema::hash() const {
  std::ostringstream canon;
  for (const Feature& f : features_) {
    canon << f.name << '\x1f' << kind_name(f.kind) << '\x1f';
    for (const std::string& c : f.categories) canon << c << '\x1e';
    canon << '\n';
  }
  return fnv1a64(canon.str());
}

}  // namespace tabfuse
