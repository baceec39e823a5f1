#include "iotscope/flow.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace iotscope {

FlowKey FlowKey::of(const PacketRecord& p) noexcept {
    const Endpoint a = p.src();
    const Endpoint b = p.dst();
    return a <= b ? FlowKey{a, b, p.protocol} : FlowKey{b, a, p.protocol};
}

std::string_view termination_name(Termination t) noexcept {
    switch (t) {
        case Termination::FIN: return "FIN";
        case Termination::RST: return "RST";
        case Termination::IDLE_TIMEOUT: return "IDLE_TIMEOUT";
        case Termination::END_OF_CAPTURE: break;
    }
    return "END_OF_CAPTURE";
}

namespace {

struct OpenFlow {
    std::size_t index;  // position in the output vector
    bool fin_fwd = false;
    bool fin_bwd = false;
};

}  // namespace

std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets,
                                       double idle_timeout_s) {
    if (!(idle_timeout_s > 0.0)) throw InvalidArgument("idle_timeout_s must be > 0");

    std::vector<std::size_t> order(packets.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return packets[a].timestamp_us < packets[b].timestamp_us;
    });

    const auto idle_us = static_cast<std::int64_t>(std::llround(idle_timeout_s * 1e6));

    std::vector<FlowRecord> flows;
    std::map<FlowKey, OpenFlow> open;

    for (std::size_t i : order) {
        const PacketRecord& p = packets[i];
        const FlowKey key = FlowKey::of(p);

        auto it = open.find(key);
        if (it != open.end() && p.timestamp_us - flows[it->second.index].last_ts_us > idle_us) {
            flows[it->second.index].terminated_by = Termination::IDLE_TIMEOUT;
            open.erase(it);
            it = open.end();
        }
        if (it == open.end()) {
            FlowRecord f;
            f.key = key;
            f.initiator = p.src();
            f.first_ts_us = p.timestamp_us;
            f.last_ts_us = p.timestamp_us;
            flows.push_back(std::move(f));
            it = open.emplace(key, OpenFlow{flows.size() - 1}).first;
        }

        FlowRecord& flow = flows[it->second.index];
        const FlowPacket fp{p.timestamp_us, p.ip_total_len, p.header_len, p.tcp_flags, p.tcp_window};
        const bool forward = p.src() == flow.initiator;
        (forward ? flow.fwd_packets : flow.bwd_packets).push_back(fp);
        flow.last_ts_us = p.timestamp_us;

        if (p.protocol != Protocol::TCP) continue;
        if (p.has_flag(tcp_flag::RST)) {
            flow.terminated_by = Termination::RST;
            open.erase(it);
            continue;
        }
        if (p.has_flag(tcp_flag::FIN)) {
            (forward ? it->second.fin_fwd : it->second.fin_bwd) = true;
            if (it->second.fin_fwd && it->second.fin_bwd) {
                flow.terminated_by = Termination::FIN;
                open.erase(it);
            }
        }
    }
    return flows;
}

}  // namespace iotscope
