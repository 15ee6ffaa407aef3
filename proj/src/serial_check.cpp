#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "anydb/txn.hpp"

namespace anydb {

namespace {

struct KeyState {
  AcId owner = kNoAc;
  std::vector<const HistoryRecord*> recs;
};

// Iterative DFS cycle search over the txn conflict graph.
bool find_cycle(const std::unordered_map<uint64_t, std::unordered_set<uint64_t>>& adj,
                std::vector<uint64_t>& cycle_out) {
  std::unordered_map<uint64_t, int> color;  // 0 white, 1 grey, 2 black
  for (const auto& [start, _] : adj) {
    if (color[start] != 0) continue;
    std::vector<std::pair<uint64_t, std::unordered_set<uint64_t>::const_iterator>> stack;
    std::vector<uint64_t> path;
    color[start] = 1;
    auto it0 = adj.at(start).begin();
    stack.push_back({start, it0});
    path.push_back(start);
    while (!stack.empty()) {
      auto& [node, it] = stack.back();
      auto adj_it = adj.find(node);
      if (adj_it == adj.end() || it == adj_it->second.end()) {
        color[node] = 2;
        stack.pop_back();
        path.pop_back();
        continue;
      }
      uint64_t next = *it;
      ++it;
      auto next_adj = adj.find(next);
      int c = color.count(next) ? color[next] : 0;
      if (c == 1) {
        auto pos = std::find(path.begin(), path.end(), next);
        cycle_out.assign(pos, path.end());
        return true;
      }
      if (c == 0) {
        color[next] = 1;
        path.push_back(next);
        stack.push_back({next, next_adj == adj.end()
                                   ? std::unordered_set<uint64_t>::const_iterator{}
                                   : next_adj->second.begin()});
        if (next_adj == adj.end()) {  // leaf
          color[next] = 2;
          stack.pop_back();
          path.pop_back();
        }
      }
    }
  }
  return false;
}

}  // namespace

SerialCheckResult check_serializable(const std::vector<HistoryRecord>& records) {
  SerialCheckResult res;

  std::unordered_map<uint64_t, KeyState> by_key;  // (table|key) packed
  by_key.reserve(records.size());
  for (const HistoryRecord& r : records) {
    uint64_t kk = (uint64_t(uint8_t(int(r.table))) << 56) ^ r.key;
    KeyState& ks = by_key[kk];
    if (ks.owner == kNoAc) ks.owner = r.ac;
    if (ks.owner != r.ac) {
      std::ostringstream os;
      os << "key " << r.key << " of " << table_name(r.table) << " executed at AC " << ks.owner
         << " and AC " << r.ac << " (ownership violated)";
      throw_db(Err::BadTrace, os.str());
    }
    ks.recs.push_back(&r);
  }

  std::unordered_map<uint64_t, uint64_t> seq_of;
  std::unordered_map<uint64_t, std::unordered_set<uint64_t>> adj;
  for (auto& [kk, ks] : by_key) {
    std::sort(ks.recs.begin(), ks.recs.end(),
              [](const HistoryRecord* a, const HistoryRecord* b) {
                return a->local_order < b->local_order;
              });
    // WR/WW/RW edges without the quadratic blowup: an incoming record
    // conflicts with the last write, and a write conflicts with every read
    // since that write.
    const HistoryRecord* last_write = nullptr;
    std::vector<const HistoryRecord*> readers;
    for (const HistoryRecord* r : ks.recs) {
      if (r->global_seq) seq_of[r->txn_id] = r->global_seq;
      auto add_edge = [&](const HistoryRecord* a, const HistoryRecord* b) {
        if (a->txn_id == b->txn_id) return;
        adj[a->txn_id].insert(b->txn_id);
        if (a->global_seq && b->global_seq && a->global_seq >= b->global_seq) {
          res.seq_consistent = false;
          if (res.detail.empty()) {
            std::ostringstream os;
            os << "edge " << a->txn_id << "->" << b->txn_id << " on " << table_name(r->table)
               << " key " << r->key << " contradicts global_seq order (" << a->global_seq
               << " >= " << b->global_seq << ")";
            res.detail = os.str();
          }
        }
      };
      if (r->kind == 'W') {
        if (last_write) add_edge(last_write, r);
        for (const HistoryRecord* rd : readers) add_edge(rd, r);
        readers.clear();
        last_write = r;
      } else {
        if (last_write) add_edge(last_write, r);
        readers.push_back(r);
      }
    }
  }

  std::vector<uint64_t> cycle;
  if (find_cycle(adj, cycle)) {
    res.ok = false;
    res.cycle = cycle;
    std::ostringstream os;
    os << "conflict cycle:";
    for (uint64_t t : cycle) os << ' ' << t;
    res.detail = os.str();
  }
  return res;
}

}  // namespace anydb
