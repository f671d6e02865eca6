#include "kgcal/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "kgcal/errors.hpp"

namespace kgcal {

std::uint32_t StringTable::intern(std::string_view name) {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  ids_.emplace(names_.back(), id);
  return id;
}

std::optional<std::uint32_t> StringTable::find(std::string_view name) const {
  if (auto it = ids_.find(std::string(name)); it != ids_.end()) return it->second;
  return std::nullopt;
}

KnowledgeGraph KnowledgeGraph::from_triples(std::span<const NamedTriple> triples) {
  KnowledgeGraph g;
  for (const auto& t : triples) g.add(t.head, t.relation, t.tail);
  g.finalize();
  return g;
}

void KnowledgeGraph::add(std::string_view head, std::string_view relation, std::string_view tail) {
  const EntityId h = entities_.intern(head);
  const RelationId r = relations_.intern(relation);
  const EntityId t = entities_.intern(tail);
  triples_.push_back({h, r, t});
}

void KnowledgeGraph::finalize() {
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());

  out_index_.clear();
  in_index_.clear();
  out_edges_.assign(entities_.size(), {});
  in_edges_.assign(entities_.size(), {});
  // Triples are sorted by (head, relation, tail), so out lists come out sorted.
  for (const auto& t : triples_) {
    out_index_[key(t.head, t.relation)].push_back(t.tail);
    in_index_[key(t.tail, t.relation)].push_back(t.head);
    out_edges_[t.head].push_back({t.relation, t.tail});
    in_edges_[t.tail].push_back({t.relation, t.head});
  }
  for (auto& [_, heads] : in_index_) std::sort(heads.begin(), heads.end());
  for (auto& edges : in_edges_) std::sort(edges.begin(), edges.end());
}

bool KnowledgeGraph::contains(EntityId head, RelationId relation, EntityId tail) const {
  return std::binary_search(triples_.begin(), triples_.end(), Triple{head, relation, tail});
}

std::span<const EntityId> KnowledgeGraph::neighbors(EntityId entity, RelationId relation,
                                                    Direction direction) const {
  const auto& index = direction == Direction::forward ? out_index_ : in_index_;
  if (entity == kUnknownId || relation == kUnknownId) return {};
  if (auto it = index.find(key(entity, relation)); it != index.end()) return it->second;
  return {};
}

std::span<const Edge> KnowledgeGraph::outgoing(EntityId entity) const {
  if (entity >= out_edges_.size()) return {};
  return out_edges_[entity];
}

std::span<const Edge> KnowledgeGraph::incoming(EntityId entity) const {
  if (entity >= in_edges_.size()) return {};
  return in_edges_[entity];
}

KnowledgeGraph load_kg(std::istream& in) {
  KnowledgeGraph g;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::string_view rest(line);
    std::string_view fields[3];
    std::size_t count = 0;
    while (true) {
      const auto tab = rest.find('\t');
      if (count < 3) fields[count] = rest.substr(0, tab);
      ++count;
      if (tab == std::string_view::npos) break;
      rest.remove_prefix(tab + 1);
    }
    if (count != 3) {
      throw ParseError("expected 3 tab-separated fields, found " + std::to_string(count), line_no);
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError("empty field", line_no);
    }
    g.add(fields[0], fields[1], fields[2]);
  }
  g.finalize();
  return g;
}

KnowledgeGraph load_kg_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open knowledge graph file: " + path.string());
  return load_kg(in);
}

void write_triples(std::ostream& out, const KnowledgeGraph& g) {
  for (const auto& t : g.triples()) {
    out << g.entity_name(t.head) << '\t' << g.relation_name(t.relation) << '\t'
        << g.entity_name(t.tail) << '\n';
  }
}

}  // namespace kgcal
