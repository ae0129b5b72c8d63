#include "bpnc/bp/backpressure.hpp"

#include <algorithm>
#include <stdexcept>

namespace bpnc::bp {

FlowId::FlowId(NodeId src, std::vector<NodeId> dsts) : source(src), destinations(std::move(dsts)) {
  if (destinations.empty()) throw std::invalid_argument("flow needs at least one destination");
  std::sort(destinations.begin(), destinations.end());
  if (std::adjacent_find(destinations.begin(), destinations.end()) != destinations.end())
    throw std::invalid_argument("duplicate flow destination");
  if (has_destination(source)) throw std::invalid_argument("flow source cannot be a destination");
}

bool FlowId::has_destination(NodeId n) const {
  return std::binary_search(destinations.begin(), destinations.end(), n);
}

void VirtualQueueSet::add_flow(FlowIndex index, const FlowId& flow) {
  auto& per_dst = queues_[index];
  for (NodeId d : flow.destinations) {
    if (d != self_) per_dst.try_emplace(d, 0);
  }
}

std::uint32_t VirtualQueueSet::backlog(FlowIndex index, NodeId dst) const {
  const auto f = queues_.find(index);
  if (f == queues_.end()) return 0;
  const auto q = f->second.find(dst);
  return q == f->second.end() ? 0 : q->second;
}

bool VirtualQueueSet::has_queue(FlowIndex index, NodeId dst) const {
  const auto f = queues_.find(index);
  return f != queues_.end() && f->second.count(dst) != 0;
}

std::vector<NodeId> VirtualQueueSet::destinations(FlowIndex index) const {
  std::vector<NodeId> out;
  const auto f = queues_.find(index);
  if (f == queues_.end()) return out;
  for (const auto& [d, _] : f->second) out.push_back(d);
  return out;
}

void VirtualQueueSet::enqueue(FlowIndex index, NodeId dst, std::uint32_t n) {
  if (dst == self_) throw std::invalid_argument("no virtual queue for the node's own destination");
  queues_[index][dst] += n;
}

std::uint32_t VirtualQueueSet::dequeue(FlowIndex index, NodeId dst, std::uint32_t n) {
  const auto f = queues_.find(index);
  if (f == queues_.end()) return 0;
  const auto q = f->second.find(dst);
  if (q == f->second.end()) return 0;
  const std::uint32_t taken = std::min(n, q->second);
  q->second -= taken;
  return taken;
}

std::uint64_t VirtualQueueSet::total() const {
  std::uint64_t sum = 0;
  for (const auto& [_, per_dst] : queues_)
    for (const auto& [__, b] : per_dst) sum += b;
  return sum;
}

std::vector<VirtualQueueSet::Entry> VirtualQueueSet::entries() const {
  std::vector<Entry> out;
  for (const auto& [f, per_dst] : queues_)
    for (const auto& [d, b] : per_dst) out.push_back({f, d, b});
  return out;
}

void PenaltyTracker::record_visit(FlowIndex flow, NodeId node) { ++visits_[{flow, node}]; }

std::uint32_t PenaltyTracker::visits(FlowIndex flow, NodeId node) const {
  const auto it = visits_.find({flow, node});
  return it == visits_.end() ? 0 : it->second;
}

double PenaltyTracker::alpha(FlowIndex flow, NodeId node) const {
  const auto f = visits(flow, node);
  return f <= 1 ? 1.0 : 1.0 / static_cast<double>(f);
}

double differential_score(const FlowView& view) {
  double sum = 0;
  for (const auto& d : view.dests) sum += std::max(d.local - d.neighbor, 0.0);
  return sum * view.alpha;
}

std::optional<FlowChoice> select_flow_multicast(std::span<const FlowView> flows) {
  std::optional<FlowChoice> best;
  for (const auto& v : flows) {
    const double score = differential_score(v);
    if (score <= 0) continue;
    if (best && (score < best->score || (score == best->score && v.flow > best->flow))) continue;
    FlowChoice c{v.flow, score, {}};
    for (const auto& d : v.dests) {
      if (d.local > d.neighbor) c.served.push_back(d.dst);
    }
    best = std::move(c);
  }
  return best;
}

std::optional<FlowChoice> select_flow_unicast(std::span<const FlowView> flows) {
  for (const auto& v : flows) {
    if (v.dests.size() != 1) throw std::invalid_argument("unicast flow view must have one destination");
  }
  return select_flow_multicast(flows);
}

double spectrum_utility(double rate, double score) {
  if (rate < 0) throw std::invalid_argument("link rate must be non-negative");
  return rate * score;
}

std::optional<Schedule> select_next_hop(std::span<const HopCandidate> candidates) {
  std::optional<Schedule> best;
  for (const auto& c : candidates) {
    const double u = spectrum_utility(c.rate, c.choice.score);
    if (u <= 0) continue;
    if (best) {
      if (u < best->utility) continue;
      if (u == best->utility &&
          std::pair(c.neighbor, c.channel) >= std::pair(best->neighbor, best->channel))
        continue;
    }
    best = Schedule{c.neighbor, c.channel, c.choice.flow, u, c.rate, c.choice.served};
  }
  return best;
}

}  // namespace bpnc::bp
