#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "iotscope/pcap.hpp"

namespace iotscope {

// One curated signature: a device category, the action it reveals, and the
// server addresses and DNS name patterns that betray it.
struct SignatureEntry {
    std::string id;
    Category category = Category::Hub;
    std::string action;
    std::vector<Ipv4> ip_addresses;
    std::vector<std::string> domain_patterns;
    std::string notes;

    friend bool operator==(const SignatureEntry&, const SignatureEntry&) = default;
};

// Signature DB file: a JSON array of entry objects with the fields above
// (category by name, addresses as dotted quads). Throws ParseError or
// InvalidRegex with the entry index and id.
std::vector<SignatureEntry> parse_signature_db(std::string_view json_text);
std::vector<SignatureEntry> load_signature_db(const std::filesystem::path& path);

enum class RuleProtocol : std::uint8_t { tcp, udp };

// The supported rule subset, one per line:
//   alert (tcp|udp) any any -> (<ipv4>|any) (<port>|any) (msg:"..."; [pcre:"/.../i";] sid:N; rev:N;)
// pcre is only accepted on udp rules and is matched against DNS query names.
struct SnortRule {
    RuleProtocol protocol = RuleProtocol::tcp;
    std::optional<Ipv4> dest_ip;          // nullopt = any
    std::optional<std::uint16_t> dest_port;  // nullopt = any
    std::string msg;
    std::optional<std::string> pcre;  // pattern between the slashes
    std::uint32_t sid = 0;
    std::uint32_t rev = 1;

    // Options in rendering order: msg, pcre, sid, rev.
    std::vector<std::pair<std::string, std::string>> options() const;

    friend bool operator==(const SnortRule&, const SnortRule&) = default;
};

inline constexpr std::uint32_t kFirstLocalSid = 1000000;

// Checks a pattern against the supported regex subset (no backreferences,
// lookaround, or named groups; no '"' or ';') and compiles it
// case-insensitively. Throws InvalidRegex.
std::regex compile_pattern(std::string_view pattern);

// Local rules use sids from kFirstLocalSid up; smaller sids throw InvalidArgument.
// `alert tcp any any -> <ip> any (msg:"<Category>/<action>"; sid:<sid>; rev:1;)`
SnortRule emit_ip_rule(const SignatureEntry& entry, Ipv4 ip, std::uint32_t sid);
// `alert udp any any -> any 53 (msg:"<Category>/<action>"; pcre:"/<pattern>/i"; sid:<sid>; rev:1;)`
SnortRule emit_dns_rule(const SignatureEntry& entry, std::string_view pattern, std::uint32_t sid);

struct RuleGeneration {
    std::vector<SnortRule> rules;
    std::map<std::uint32_t, std::string> sid_to_entry;
};

// For each entry in DB order: one rule per IP, then one per domain pattern.
// sids increase by one from first_sid.
RuleGeneration generate_rules(std::span<const SignatureEntry> db,
                              std::uint32_t first_sid = kFirstLocalSid);

std::string render_rule(const SnortRule& rule);
std::string render_rules(std::span<const SnortRule> rules);

// Parses one rule line. Throws RuleSyntaxError (line number in the message).
SnortRule parse_rule(std::string_view line, std::size_t line_no = 1);
// Blank lines and '#' comments are skipped; sids must be unique.
std::vector<SnortRule> parse_rules_text(std::string_view text);
std::vector<SnortRule> parse_rules(const std::filesystem::path& path);

struct Alert {
    std::int64_t timestamp_us = 0;
    std::uint32_t sid = 0;
    std::string msg;
    Protocol protocol = Protocol::OTHER;
    Endpoint src;
    Endpoint dst;
    std::string matched_entry_id;  // empty when no DB mapping was supplied

    friend bool operator==(const Alert&, const Alert&) = default;
};

// Rules with compiled patterns, shareable across threads.
class RuleSet {
public:
    explicit RuleSet(std::vector<SnortRule> rules);

    const std::vector<SnortRule>& rules() const noexcept { return rules_; }

    // qname is the decoded DNS query name of the packet, if any.
    bool matches(std::size_t rule_index, const PacketRecord& packet,
                 const std::optional<std::string>& qname) const;

private:
    std::vector<SnortRule> rules_;
    std::vector<std::optional<std::regex>> patterns_;
};

// TCP rules fire when the rule address is either endpoint of a TCP packet
// (traffic from or to the address). UDP rules need either port to equal the
// rule port and, with a pcre, a DNS query name the pattern matches. At most one
// alert per (rule, packet); output sorted by timestamp, then sid.
std::vector<Alert> match_rules(std::span<const PacketRecord> packets, const RuleSet& rules,
                               const std::map<std::uint32_t, std::string>& sid_to_entry = {});
std::vector<Alert> match_rules(std::span<const PacketRecord> packets,
                               std::span<const SnortRule> rules,
                               const std::map<std::uint32_t, std::string>& sid_to_entry = {});

// `[<ISO-8601>] [sid:<sid>] <msg> {<PROTO>} <src_ip>:<src_port> -> <dst_ip>:<dst_port>`
std::string format_alert(const Alert& alert);
std::string iso8601_utc(std::int64_t timestamp_us);

struct DnsFrequencyRow {
    std::string qname;
    std::size_t queries = 0;
    std::size_t distinct_sources = 0;

    friend bool operator==(const DnsFrequencyRow&, const DnsFrequencyRow&) = default;
};

// Query names over all UDP packets with either port 53, most frequent first,
// then by name.
std::vector<DnsFrequencyRow> dns_frequency_report(std::span<const PacketRecord> packets);

}  // namespace iotscope
