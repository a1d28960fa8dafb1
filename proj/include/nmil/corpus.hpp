#pragma once

// Instances, daily bags, super-bags and datasets, plus the newline-delimited
// JSON dataset format.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmil {

/// Input that violates a documented invariant (bad flag, bad record shape).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed line in an input file; line numbers are 1-based.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using FeatureVector = std::vector<double>;

/// One document: a dense feature vector plus identity metadata.
struct Instance {
  std::string id;
  FeatureVector features;
  std::optional<std::string> title;

  bool operator==(const Instance&) const = default;
};

/// All instances observed on one day. day_index is 1-based within the super-bag.
struct Bag {
  int day_index = 1;
  std::vector<Instance> instances;

  bool operator==(const Bag&) const = default;
};

enum class Label : int { negative = -1, positive = 1 };

constexpr int to_int(Label y) noexcept { return static_cast<int>(y); }
Label label_from_int(int value);

/// Ordered run of daily bags with a single observed label.
///
/// class_label (1..K) is only meaningful for positive super-bags. target_doc is
/// the reference document linked to the event; it is used by diagnostics and
/// never appears in any bag.
struct SuperBag {
  std::string event_id;
  std::vector<Bag> bags;
  Label label = Label::negative;
  std::optional<int> class_label;
  std::optional<Instance> target_doc;

  std::size_t num_days() const noexcept { return bags.size(); }
  std::size_t num_instances() const noexcept;

  bool operator==(const SuperBag&) const = default;
};

struct Dataset {
  std::vector<SuperBag> super_bags;
  std::size_t feature_dim = 0;
  int history_days = 0;
  int lead_time = 1;
  std::optional<std::vector<std::string>> class_names;

  std::size_t size() const noexcept { return super_bags.size(); }

  bool operator==(const Dataset&) const = default;
};

/// Throws ValidationError naming the offending instance or event.
void validate(const Dataset& ds);

/// Returns a copy holding only the super-bags at the given positions.
Dataset subset(const Dataset& ds, const std::vector<std::size_t>& indices);

struct LoadStats {
  std::size_t dropped_empty_days = 0;
};

Dataset read_dataset(std::istream& in, LoadStats* stats = nullptr);
void write_dataset(const Dataset& ds, std::ostream& out);

Dataset load_dataset(const std::filesystem::path& path, LoadStats* stats = nullptr);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);

}  // namespace nmil
