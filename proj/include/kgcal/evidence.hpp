#pragma once

// Constrained relational paths: a relation sequence walked from a query
// entity, optionally conjoined with one answer-side triple r_c(answer, c).

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgcal/kg_store.hpp"

namespace kgcal {

struct PathStep {
  RelationId relation;
  Direction direction = Direction::forward;

  auto operator<=>(const PathStep&) const = default;
};

struct Constraint {
  RelationId relation;
  EntityId entity;

  auto operator<=>(const Constraint&) const = default;
};

struct ConstrainedPath {
  std::vector<PathStep> steps;
  std::optional<Constraint> constraint;

  std::size_t length() const noexcept { return steps.size(); }
  auto operator<=>(const ConstrainedPath&) const = default;
};

// String-level mirror of ConstrainedPath used at I/O boundaries and by the
// reward, which compares generated text against gold evidence by name.
struct NamedStep {
  std::string relation;
  Direction direction = Direction::forward;

  auto operator<=>(const NamedStep&) const = default;
};

struct NamedConstraint {
  std::string relation;
  std::string entity;

  auto operator<=>(const NamedConstraint&) const = default;
};

struct NamedPath {
  std::vector<NamedStep> steps;
  std::optional<NamedConstraint> constraint;

  auto operator<=>(const NamedPath&) const = default;
};

// Inverse steps are written with a leading '~'.
std::string step_token(const NamedStep& step);
NamedStep parse_step_token(std::string_view token);

NamedPath to_named(const KnowledgeGraph& g, const ConstrainedPath& path);
// Names missing from the graph resolve to kUnknownId and ground to the empty set.
ConstrainedPath resolve(const KnowledgeGraph& g, const NamedPath& path);

struct GroundingResult {
  std::vector<EntityId> candidates;          // sorted
  std::vector<std::size_t> frontier_sizes;   // one entry per hop
};

struct SearchOptions {
  std::size_t max_depth = 4;
  bool allow_inverse = false;
  std::size_t max_paths = 256;
};

GroundingResult ground(const KnowledgeGraph& g, EntityId query_entity, const ConstrainedPath& path);

// Every relation sequence of minimal length L <= max_depth leading from
// source to target, in lexicographic step order. Returns {[]} when
// source == target and {} when the target is out of reach. Throws
// ResourceLimitError when more than max_paths sequences exist.
std::vector<ConstrainedPath> enumerate_shortest_paths(const KnowledgeGraph& g, EntityId source,
                                                      EntityId target, const SearchOptions& options);

// Candidate constraints from the outgoing triples of grounded gold answers.
// `grounded` and `answers` must be sorted.
std::vector<Constraint> mine_constraints(const KnowledgeGraph& g, const ConstrainedPath& base,
                                         std::span<const EntityId> grounded,
                                         std::span<const EntityId> answers);

// Concrete entity walks realizing `path` from `query_entity` (each walk has
// length()+1 entities, the last one satisfying the constraint). Stops after
// `limit` walks.
std::vector<std::vector<EntityId>> enumerate_walks(const KnowledgeGraph& g, EntityId query_entity,
                                                   const ConstrainedPath& path, std::size_t limit);

// Sorted-set helpers.
std::size_t intersection_size(std::span<const EntityId> a, std::span<const EntityId> b);
std::vector<EntityId> sorted_unique(std::vector<EntityId> ids);

}  // namespace kgcal
