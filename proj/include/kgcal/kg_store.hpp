#pragma once

// In-memory triple store. Entity and relation names are interned to dense
// 32-bit ids; every algorithm downstream works on ids and only the I/O
// boundary touches strings.

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace kgcal {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

// Id that never resolves. Grounding through it yields the empty set.
inline constexpr std::uint32_t kUnknownId = 0xFFFFFFFFu;

enum class Direction : std::uint8_t { forward, inverse };

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  auto operator<=>(const Triple&) const = default;
};

struct NamedTriple {
  std::string head;
  std::string relation;
  std::string tail;
};

// Append-only string <-> id table.
class StringTable {
 public:
  std::uint32_t intern(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  const std::string& name(std::uint32_t id) const { return names_.at(id); }
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

// (relation, entity) pair in an entity's adjacency list.
struct Edge {
  RelationId relation;
  EntityId entity;

  auto operator<=>(const Edge&) const = default;
};

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Builds an indexed graph from named triples; duplicates collapse.
  static KnowledgeGraph from_triples(std::span<const NamedTriple> triples);

  std::size_t num_entities() const noexcept { return entities_.size(); }
  std::size_t num_relations() const noexcept { return relations_.size(); }
  std::size_t num_triples() const noexcept { return triples_.size(); }

  std::optional<EntityId> find_entity(std::string_view name) const { return entities_.find(name); }
  std::optional<RelationId> find_relation(std::string_view name) const { return relations_.find(name); }
  // Like find_*, but unknown names map to kUnknownId.
  EntityId entity_or_unknown(std::string_view name) const { return find_entity(name).value_or(kUnknownId); }
  RelationId relation_or_unknown(std::string_view name) const { return find_relation(name).value_or(kUnknownId); }

  const std::string& entity_name(EntityId id) const { return entities_.name(id); }
  const std::string& relation_name(RelationId id) const { return relations_.name(id); }

  // Sorted, duplicate-free.
  const std::vector<Triple>& triples() const noexcept { return triples_; }
  bool contains(EntityId head, RelationId relation, EntityId tail) const;

  // Sorted tails of (entity, relation) for forward, sorted heads for inverse.
  // Unknown ids give an empty span.
  std::span<const EntityId> neighbors(EntityId entity, RelationId relation, Direction direction) const;

  // All (relation, tail) pairs leaving an entity, or (relation, head) pairs
  // entering it, sorted by relation then entity.
  std::span<const Edge> outgoing(EntityId entity) const;
  std::span<const Edge> incoming(EntityId entity) const;

 private:
  friend KnowledgeGraph load_kg(std::istream& in);

  void add(std::string_view head, std::string_view relation, std::string_view tail);
  void finalize();

  static std::uint64_t key(std::uint32_t entity, std::uint32_t relation) noexcept {
    return (static_cast<std::uint64_t>(entity) << 32) | relation;
  }

  StringTable entities_;
  StringTable relations_;
  std::vector<Triple> triples_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> out_index_;
  std::unordered_map<std::uint64_t, std::vector<EntityId>> in_index_;
  std::vector<std::vector<Edge>> out_edges_;
  std::vector<std::vector<Edge>> in_edges_;
};

// Reads `head<TAB>relation<TAB>tail` lines. Blank lines are skipped and a
// trailing CR is stripped. Throws ParseError naming the offending line.
KnowledgeGraph load_kg(std::istream& in);
KnowledgeGraph load_kg_file(const std::filesystem::path& path);

// Writes the triple set back out in TSV form, in id order.
void write_triples(std::ostream& out, const KnowledgeGraph& g);

}  // namespace kgcal
