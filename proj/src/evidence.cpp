#include "kgcal/evidence.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

#include "kgcal/errors.hpp"

namespace kgcal {

std::string step_token(const NamedStep& step) {
  return step.direction == Direction::inverse ? "~" + step.relation : step.relation;
}

NamedStep parse_step_token(std::string_view token) {
  if (token.size() > 1 && token.front() == '~') {
    return {std::string(token.substr(1)), Direction::inverse};
  }
  return {std::string(token), Direction::forward};
}

NamedPath to_named(const KnowledgeGraph& g, const ConstrainedPath& path) {
  NamedPath named;
  named.steps.reserve(path.steps.size());
  for (const auto& s : path.steps) named.steps.push_back({g.relation_name(s.relation), s.direction});
  if (path.constraint) {
    named.constraint = NamedConstraint{g.relation_name(path.constraint->relation),
                                       g.entity_name(path.constraint->entity)};
  }
  return named;
}

ConstrainedPath resolve(const KnowledgeGraph& g, const NamedPath& path) {
  ConstrainedPath resolved;
  resolved.steps.reserve(path.steps.size());
  for (const auto& s : path.steps) resolved.steps.push_back({g.relation_or_unknown(s.relation), s.direction});
  if (path.constraint) {
    resolved.constraint = Constraint{g.relation_or_unknown(path.constraint->relation),
                                     g.entity_or_unknown(path.constraint->entity)};
  }
  return resolved;
}

std::size_t intersection_size(std::span<const EntityId> a, std::span<const EntityId> b) {
  std::size_t n = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

std::vector<EntityId> sorted_unique(std::vector<EntityId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

namespace {

bool satisfies(const KnowledgeGraph& g, EntityId entity, const std::optional<Constraint>& c) {
  return !c || g.contains(entity, c->relation, c->entity);
}

}  // namespace

GroundingResult ground(const KnowledgeGraph& g, EntityId query_entity, const ConstrainedPath& path) {
  GroundingResult result;
  std::vector<EntityId> frontier;
  if (query_entity < g.num_entities()) frontier.push_back(query_entity);

  std::vector<EntityId> next;
  for (const auto& step : path.steps) {
    next.clear();
    for (EntityId e : frontier) {
      const auto hop = g.neighbors(e, step.relation, step.direction);
      next.insert(next.end(), hop.begin(), hop.end());
    }
    frontier = sorted_unique(std::move(next));
    next = {};
    result.frontier_sizes.push_back(frontier.size());
  }

  if (path.constraint) {
    std::erase_if(frontier, [&](EntityId e) { return !satisfies(g, e, path.constraint); });
  }
  result.candidates = std::move(frontier);
  return result;
}

namespace {

// Layered BFS distances from `start`, stopping at `max_depth` or as soon as
// `stop` is reached.
std::unordered_map<EntityId, std::size_t> bfs_layers(const KnowledgeGraph& g, EntityId start,
                                                     EntityId stop, std::size_t max_depth,
                                                     bool reverse, bool allow_inverse) {
  std::unordered_map<EntityId, std::size_t> dist{{start, 0}};
  std::vector<EntityId> layer{start};
  for (std::size_t d = 1; d <= max_depth && !layer.empty() && !dist.contains(stop); ++d) {
    std::vector<EntityId> next;
    auto visit = [&](EntityId v) {
      if (dist.emplace(v, d).second) next.push_back(v);
    };
    for (EntityId u : layer) {
      // Forward edges traversed backwards when searching from the target.
      for (const auto& e : reverse ? g.incoming(u) : g.outgoing(u)) visit(e.entity);
      if (allow_inverse) {
        for (const auto& e : reverse ? g.outgoing(u) : g.incoming(u)) visit(e.entity);
      }
    }
    layer = std::move(next);
  }
  return dist;
}

struct ShortestPathSearch {
  const KnowledgeGraph& g;
  const SearchOptions& options;
  std::size_t length;
  const std::unordered_map<EntityId, std::size_t>& from_source;
  const std::unordered_map<EntityId, std::size_t>& to_target;
  std::vector<ConstrainedPath> results;
  std::vector<PathStep> prefix;

  bool on_shortest_dag(EntityId v, std::size_t layer) const {
    auto s = from_source.find(v);
    auto t = to_target.find(v);
    return s != from_source.end() && t != to_target.end() && s->second == layer &&
           t->second == length - layer;
  }

  void extend(const std::vector<EntityId>& frontier) {
    const std::size_t layer = prefix.size();
    if (layer == length) {
      results.push_back({prefix, std::nullopt});
      if (results.size() > options.max_paths) {
        throw ResourceLimitError("more than " + std::to_string(options.max_paths) +
                                 " shortest paths; raise max_paths to enumerate them all");
      }
      return;
    }
    std::map<PathStep, std::vector<EntityId>> by_step;
    for (EntityId u : frontier) {
      for (const auto& e : g.outgoing(u)) {
        if (on_shortest_dag(e.entity, layer + 1)) {
          by_step[{e.relation, Direction::forward}].push_back(e.entity);
        }
      }
      if (options.allow_inverse) {
        for (const auto& e : g.incoming(u)) {
          if (on_shortest_dag(e.entity, layer + 1)) {
            by_step[{e.relation, Direction::inverse}].push_back(e.entity);
          }
        }
      }
    }
    for (auto& [step, next] : by_step) {
      prefix.push_back(step);
      extend(sorted_unique(std::move(next)));
      prefix.pop_back();
    }
  }
};

}  // namespace

std::vector<ConstrainedPath> enumerate_shortest_paths(const KnowledgeGraph& g, EntityId source,
                                                      EntityId target, const SearchOptions& options) {
  if (source >= g.num_entities() || target >= g.num_entities()) return {};
  if (source == target) return {ConstrainedPath{}};

  const auto from_source =
      bfs_layers(g, source, target, options.max_depth, /*reverse=*/false, options.allow_inverse);
  const auto hit = from_source.find(target);
  if (hit == from_source.end()) return {};
  const std::size_t length = hit->second;
  const auto to_target =
      bfs_layers(g, target, source, length, /*reverse=*/true, options.allow_inverse);

  ShortestPathSearch search{g, options, length, from_source, to_target, {}, {}};
  search.extend({source});
  return std::move(search.results);
}

std::vector<Constraint> mine_constraints(const KnowledgeGraph& g, [[maybe_unused]] const ConstrainedPath& base,
                                         std::span<const EntityId> grounded,
                                         std::span<const EntityId> answers) {
  std::vector<EntityId> supported;
  std::set_intersection(grounded.begin(), grounded.end(), answers.begin(), answers.end(),
                        std::back_inserter(supported));

  std::vector<Constraint> out;
  for (EntityId answer : supported) {
    for (const auto& e : g.outgoing(answer)) out.push_back({e.relation, e.entity});
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());

  // Each pair comes from a gold answer's own outgoing triple, so applying it
  // keeps that answer in the constrained grounding.
  return out;
}

std::vector<std::vector<EntityId>> enumerate_walks(const KnowledgeGraph& g, EntityId query_entity,
                                                   const ConstrainedPath& path, std::size_t limit) {
  std::vector<std::vector<EntityId>> walks;
  if (query_entity >= g.num_entities() || limit == 0) return walks;
  std::vector<EntityId> walk{query_entity};

  auto dfs = [&](auto&& self) -> void {
    if (walks.size() >= limit) return;
    const std::size_t depth = walk.size() - 1;
    if (depth == path.steps.size()) {
      if (satisfies(g, walk.back(), path.constraint)) walks.push_back(walk);
      return;
    }
    const auto& step = path.steps[depth];
    for (EntityId next : g.neighbors(walk.back(), step.relation, step.direction)) {
      walk.push_back(next);
      self(self);
      walk.pop_back();
      if (walks.size() >= limit) return;
    }
  };
  dfs(dfs);
  return walks;
}

}  // namespace kgcal
