#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "iotscope/pcap.hpp"

namespace iotscope {

// Bidirectional 5-tuple with its endpoints in canonical (ip, port) order, so
// the key of A->B equals the key of B->A.
struct FlowKey {
    Endpoint lo;
    Endpoint hi;
    Protocol protocol = Protocol::OTHER;

    static FlowKey of(const PacketRecord& p) noexcept;

    friend constexpr auto operator<=>(const FlowKey&, const FlowKey&) = default;
};

struct FlowPacket {
    std::int64_t timestamp_us = 0;
    std::uint32_t ip_total_len = 0;
    std::uint32_t header_len = 0;
    std::uint8_t tcp_flags = 0;
    std::uint16_t tcp_window = 0;
};

enum class Termination : std::uint8_t { FIN, RST, IDLE_TIMEOUT, END_OF_CAPTURE };

std::string_view termination_name(Termination t) noexcept;

// A flow's forward direction is that of its first packet (the initiator).
struct FlowRecord {
    FlowKey key;
    Endpoint initiator;
    std::int64_t first_ts_us = 0;
    std::int64_t last_ts_us = 0;
    std::vector<FlowPacket> fwd_packets;
    std::vector<FlowPacket> bwd_packets;
    Termination terminated_by = Termination::END_OF_CAPTURE;

    Endpoint responder() const noexcept { return key.lo == initiator ? key.hi : key.lo; }
    std::size_t packet_count() const noexcept { return fwd_packets.size() + bwd_packets.size(); }
};

inline constexpr double kDefaultIdleTimeoutS = 120.0;

// Groups packets into bidirectional flows. Input is stably sorted by
// timestamp first if it is not already ordered. A flow ends on a FIN seen in
// each direction, on RST, when the next packet arrives more than
// idle_timeout_s after the previous one (that packet starts a new flow), or at
// end of input. Flows are returned in order of their first packet.
std::vector<FlowRecord> assemble_flows(std::span<const PacketRecord> packets,
                                       double idle_timeout_s = kDefaultIdleTimeoutS);

}  // namespace iotscope
