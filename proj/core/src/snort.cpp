#include "iotscope/snort.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "iotscope/dns.hpp"

namespace iotscope {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string entry_context(std::size_t index, const json& e) {
    std::string ctx = "signature entry " + std::to_string(index);
    if (e.is_object() && e.contains("id") && e["id"].is_string()) {
        ctx += " ('" + e["id"].get<std::string>() + "')";
    }
    return ctx;
}

std::string message_for(const SignatureEntry& entry) {
    return std::string(category_name(entry.category)) + "/" + entry.action;
}

}  // namespace

std::regex compile_pattern(std::string_view pattern) {
    if (pattern.empty()) throw InvalidRegex("empty pattern");
    int depth = 0;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        const char c = pattern[i];
        switch (c) {
            case '"':
            case ';':
                throw InvalidRegex("pattern may not contain '\"' or ';'");
            case '\\': {
                if (i + 1 >= pattern.size()) throw InvalidRegex("dangling escape");
                const char e = pattern[++i];
                if (e >= '1' && e <= '9') throw InvalidRegex("backreferences are not supported");
                if (std::isalpha(static_cast<unsigned char>(e)) &&
                    std::string_view("dDwWsS").find(e) == std::string_view::npos) {
                    throw InvalidRegex(std::string("unsupported escape \\") + e);
                }
                break;
            }
            case '(':
                if (i + 1 < pattern.size() && pattern[i + 1] == '?') {
                    if (i + 2 >= pattern.size() || pattern[i + 2] != ':') {
                        throw InvalidRegex("lookaround and named groups are not supported");
                    }
                }
                ++depth;
                break;
            case ')':
                if (--depth < 0) throw InvalidRegex("unbalanced ')'");
                break;
            case '[': {
                std::size_t j = i + 1;
                if (j < pattern.size() && pattern[j] == '^') ++j;
                if (j < pattern.size() && pattern[j] == ']') ++j;
                while (j < pattern.size() && pattern[j] != ']') {
                    if (pattern[j] == '\\') ++j;
                    ++j;
                }
                if (j >= pattern.size()) throw InvalidRegex("unterminated character class");
                i = j;
                break;
            }
            default:
                break;
        }
    }
    if (depth != 0) throw InvalidRegex("unbalanced '('");
    try {
        return std::regex(std::string(pattern), std::regex::ECMAScript | std::regex::icase);
    } catch (const std::regex_error& e) {
        throw InvalidRegex("invalid pattern '" + std::string(pattern) + "': " + e.what());
    }
}

std::vector<SignatureEntry> parse_signature_db(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("signature DB is not valid JSON: ") + e.what());
    }
    if (!doc.is_array()) throw ParseError("signature DB must be a JSON array of entries");

    std::vector<SignatureEntry> db;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const json& e = doc[i];
        const std::string ctx = entry_context(i, e);
        if (!e.is_object()) throw ParseError(ctx + ": not an object");
        auto text_field = [&](const char* key, bool required) -> std::string {
            if (!e.contains(key)) {
                if (required) throw ParseError(ctx + ": missing '" + key + "'");
                return {};
            }
            if (!e[key].is_string()) throw ParseError(ctx + ": '" + key + "' must be a string");
            return e[key].get<std::string>();
        };
        auto list_field = [&](const char* key) -> std::vector<std::string> {
            if (!e.contains(key)) return {};
            std::vector<std::string> out;
            if (!e[key].is_array()) throw ParseError(ctx + ": '" + key + "' must be an array");
            for (const auto& v : e[key]) {
                if (!v.is_string()) throw ParseError(ctx + ": '" + key + "' must hold strings");
                out.push_back(v.get<std::string>());
            }
            return out;
        };

        SignatureEntry entry;
        entry.id = text_field("id", true);
        if (entry.id.empty()) throw ParseError(ctx + ": empty id");
        if (!ids.insert(entry.id).second) throw ParseError(ctx + ": duplicate id");
        const auto category = parse_category(text_field("category", true));
        if (!category) throw ParseError(ctx + ": unknown category");
        entry.category = *category;
        entry.action = text_field("action", true);
        if (entry.action.find_first_of("\"\\;\n") != std::string::npos) {
            throw ParseError(ctx + ": action may not contain quotes, backslashes, ';' or newlines");
        }
        entry.notes = text_field("notes", false);
        for (const auto& ip : list_field("ip_addresses")) {
            const auto parsed = parse_ipv4(ip);
            if (!parsed) throw ParseError(ctx + ": bad IPv4 address '" + ip + "'");
            entry.ip_addresses.push_back(*parsed);
        }
        entry.domain_patterns = list_field("domain_patterns");
        if (entry.ip_addresses.empty() && entry.domain_patterns.empty()) {
            throw ParseError(ctx + ": needs at least one IP address or domain pattern");
        }
        for (const auto& pattern : entry.domain_patterns) {
            try {
                compile_pattern(pattern);
            } catch (const InvalidRegex& err) {
                throw InvalidRegex(ctx + ": " + err.what());
            }
        }
        db.push_back(std::move(entry));
    }
    return db;
}

std::vector<SignatureEntry> load_signature_db(const std::filesystem::path& path) {
    return parse_signature_db(read_file(path));
}

std::vector<std::pair<std::string, std::string>> SnortRule::options() const {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("msg", msg);
    if (pcre) out.emplace_back("pcre", "/" + *pcre + "/i");
    out.emplace_back("sid", std::to_string(sid));
    out.emplace_back("rev", std::to_string(rev));
    return out;
}

namespace {

void check_local_sid(std::uint32_t sid) {
    if (sid < kFirstLocalSid) {
        throw InvalidArgument("sid " + std::to_string(sid) + " is below the local range starting at " +
                              std::to_string(kFirstLocalSid));
    }
}

}  // namespace

SnortRule emit_ip_rule(const SignatureEntry& entry, Ipv4 ip, std::uint32_t sid) {
    check_local_sid(sid);
    SnortRule rule;
    rule.protocol = RuleProtocol::tcp;
    rule.dest_ip = ip;
    rule.msg = message_for(entry);
    rule.sid = sid;
    return rule;
}

SnortRule emit_dns_rule(const SignatureEntry& entry, std::string_view pattern, std::uint32_t sid) {
    check_local_sid(sid);
    compile_pattern(pattern);
    SnortRule rule;
    rule.protocol = RuleProtocol::udp;
    rule.dest_port = kDnsPort;
    rule.msg = message_for(entry);
    rule.pcre = std::string(pattern);
    rule.sid = sid;
    return rule;
}

RuleGeneration generate_rules(std::span<const SignatureEntry> db, std::uint32_t first_sid) {
    RuleGeneration out;
    std::uint32_t sid = first_sid;
    for (const auto& entry : db) {
        for (const auto ip : entry.ip_addresses) {
            out.sid_to_entry[sid] = entry.id;
            out.rules.push_back(emit_ip_rule(entry, ip, sid++));
        }
        for (const auto& pattern : entry.domain_patterns) {
            out.sid_to_entry[sid] = entry.id;
            out.rules.push_back(emit_dns_rule(entry, pattern, sid++));
        }
    }
    return out;
}

namespace {

std::string escape_msg(std::string_view s) {
    std::string out;
    for (char c : s) {
        if (c == '\\' || c == '"' || c == ';') out.push_back('\\');
        out.push_back(c);
    }
    return out;
}

class RuleScanner {
public:
    RuleScanner(std::string_view text, std::size_t line_no) : text_(text), line_no_(line_no) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw RuleSyntaxError("line " + std::to_string(line_no_) + ": " + what);
    }

    void skip_space() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
    }
    bool at_end() const { return pos_ >= text_.size(); }
    char peek() const { return at_end() ? '\0' : text_[pos_]; }

    std::string_view word() {
        skip_space();
        const auto start = pos_;
        while (!at_end() && text_[pos_] != ' ' && text_[pos_] != '\t' && text_[pos_] != '(') ++pos_;
        return text_.substr(start, pos_ - start);
    }

    void expect(char c) {
        skip_space();
        if (peek() != c) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string_view key() {
        skip_space();
        const auto start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
            ++pos_;
        }
        if (pos_ == start) fail("expected an option keyword");
        return text_.substr(start, pos_ - start);
    }

    // Raw text between double quotes; a backslash protects the next character.
    std::string_view quoted() {
        skip_space();
        if (peek() != '"') fail("expected a quoted value");
        const auto start = ++pos_;
        while (!at_end() && text_[pos_] != '"') {
            if (text_[pos_] == '\\') ++pos_;
            ++pos_;
        }
        if (at_end()) fail("unterminated quoted value");
        return text_.substr(start, pos_++ - start);
    }

    std::string_view bare() {
        skip_space();
        const auto start = pos_;
        while (!at_end() && text_[pos_] != ';' && text_[pos_] != ')') ++pos_;
        auto v = text_.substr(start, pos_ - start);
        while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
        return v;
    }

private:
    std::string_view text_;
    std::size_t line_no_;
    std::size_t pos_ = 0;
};

template <typename T>
std::optional<T> parse_uint(std::string_view s) {
    T v{};
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string unescape(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) ++i;
        out.push_back(s[i]);
    }
    return out;
}

}  // namespace

std::string render_rule(const SnortRule& rule) {
    std::string out = "alert ";
    out += rule.protocol == RuleProtocol::tcp ? "tcp" : "udp";
    out += " any any -> ";
    out += rule.dest_ip ? to_string(*rule.dest_ip) : "any";
    out += ' ';
    out += rule.dest_port ? std::to_string(*rule.dest_port) : "any";
    out += " (";
    bool first = true;
    for (const auto& [key, value] : rule.options()) {
        if (!first) out += ' ';
        first = false;
        out += key;
        out += ':';
        if (key == "msg") out += "\"" + escape_msg(value) + "\"";
        else if (key == "pcre") out += "\"" + value + "\"";
        else out += value;
        out += ';';
    }
    out += ')';
    return out;
}

std::string render_rules(std::span<const SnortRule> rules) {
    std::string out;
    for (const auto& r : rules) out += render_rule(r) + "\n";
    return out;
}

SnortRule parse_rule(std::string_view line, std::size_t line_no) {
    RuleScanner s(line, line_no);
    SnortRule rule;

    if (const auto action = s.word(); action != "alert") {
        s.fail("unsupported action '" + std::string(action) + "' (only 'alert')");
    }
    const auto proto = s.word();
    if (proto == "tcp") rule.protocol = RuleProtocol::tcp;
    else if (proto == "udp") rule.protocol = RuleProtocol::udp;
    else s.fail("unsupported protocol '" + std::string(proto) + "'");
    if (s.word() != "any" || s.word() != "any") s.fail("source must be 'any any'");
    if (s.word() != "->") s.fail("expected '->'");
    if (const auto ip = s.word(); ip != "any") {
        rule.dest_ip = parse_ipv4(ip);
        if (!rule.dest_ip) s.fail("bad destination address '" + std::string(ip) + "'");
    }
    if (const auto port = s.word(); port != "any") {
        rule.dest_port = parse_uint<std::uint16_t>(port);
        if (!rule.dest_port) s.fail("bad destination port '" + std::string(port) + "'");
    }

    s.expect('(');
    std::set<std::string, std::less<>> seen;
    bool have_msg = false, have_sid = false;
    while (true) {
        s.skip_space();
        if (s.peek() == ')') break;
        if (s.at_end()) s.fail("missing ')'");
        const auto key = s.key();
        if (!seen.insert(std::string(key)).second) s.fail("duplicate option '" + std::string(key) + "'");
        s.expect(':');
        if (key == "msg") {
            rule.msg = unescape(s.quoted());
            have_msg = true;
        } else if (key == "pcre") {
            const auto v = s.quoted();
            const auto close = v.rfind('/');
            if (v.size() < 2 || v.front() != '/' || close == 0 || v.substr(close) != "/i") {
                s.fail("pcre must have the form \"/pattern/i\"");
            }
            rule.pcre = std::string(v.substr(1, close - 1));
            try {
                compile_pattern(*rule.pcre);
            } catch (const InvalidRegex& e) {
                s.fail(e.what());
            }
        } else if (key == "sid") {
            const auto sid = parse_uint<std::uint32_t>(s.bare());
            if (!sid || *sid < kFirstLocalSid) {
                s.fail("sid must be an integer >= " + std::to_string(kFirstLocalSid));
            }
            rule.sid = *sid;
            have_sid = true;
        } else if (key == "rev") {
            const auto rev = parse_uint<std::uint32_t>(s.bare());
            if (!rev || *rev < 1) s.fail("rev must be a positive integer");
            rule.rev = *rev;
        } else {
            s.fail("unsupported option '" + std::string(key) + "'");
        }
        s.expect(';');
    }
    s.expect(')');
    s.skip_space();
    if (!s.at_end()) s.fail("trailing text after ')'");
    if (!have_msg) s.fail("missing msg");
    if (!have_sid) s.fail("missing sid");
    if (rule.pcre && rule.protocol != RuleProtocol::udp) s.fail("pcre is only supported on udp rules");
    return rule;
}

std::vector<SnortRule> parse_rules_text(std::string_view text) {
    std::vector<SnortRule> rules;
    std::set<std::uint32_t> sids;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos || line[first] == '#') continue;
        auto rule = parse_rule(line.substr(first), line_no);
        if (!sids.insert(rule.sid).second) {
            throw RuleSyntaxError("line " + std::to_string(line_no) + ": duplicate sid " +
                                  std::to_string(rule.sid));
        }
        rules.push_back(std::move(rule));
    }
    return rules;
}

std::vector<SnortRule> parse_rules(const std::filesystem::path& path) {
    return parse_rules_text(read_file(path));
}

RuleSet::RuleSet(std::vector<SnortRule> rules) : rules_(std::move(rules)) {
    for (const auto& r : rules_) {
        patterns_.push_back(r.pcre ? std::optional<std::regex>(compile_pattern(*r.pcre)) : std::nullopt);
    }
}

bool RuleSet::matches(std::size_t i, const PacketRecord& p, const std::optional<std::string>& qname) const {
    const SnortRule& r = rules_[i];
    const Protocol want = r.protocol == RuleProtocol::tcp ? Protocol::TCP : Protocol::UDP;
    if (p.protocol != want) return false;
    if (r.dest_ip && *r.dest_ip != p.src_ip && *r.dest_ip != p.dst_ip) return false;
    if (r.dest_port && *r.dest_port != p.src_port && *r.dest_port != p.dst_port) return false;
    if (patterns_[i]) {
        if (!qname) return false;
        if (!std::regex_search(*qname, *patterns_[i])) return false;
    }
    return true;
}

std::vector<Alert> match_rules(std::span<const PacketRecord> packets, const RuleSet& rules,
                               const std::map<std::uint32_t, std::string>& sid_to_entry) {
    std::vector<Alert> alerts;
    for (const auto& p : packets) {
        std::optional<std::string> qname;
        if (p.protocol == Protocol::UDP) qname = parse_dns_qname(p.l4_payload);
        for (std::size_t i = 0; i < rules.rules().size(); ++i) {
            if (!rules.matches(i, p, qname)) continue;
            const SnortRule& r = rules.rules()[i];
            Alert a;
            a.timestamp_us = p.timestamp_us;
            a.sid = r.sid;
            a.msg = r.msg;
            a.protocol = p.protocol;
            a.src = p.src();
            a.dst = p.dst();
            if (auto it = sid_to_entry.find(r.sid); it != sid_to_entry.end()) a.matched_entry_id = it->second;
            alerts.push_back(std::move(a));
        }
    }
    std::stable_sort(alerts.begin(), alerts.end(), [](const Alert& a, const Alert& b) {
        return a.timestamp_us < b.timestamp_us || (a.timestamp_us == b.timestamp_us && a.sid < b.sid);
    });
    return alerts;
}

std::vector<Alert> match_rules(std::span<const PacketRecord> packets,
                               std::span<const SnortRule> rules,
                               const std::map<std::uint32_t, std::string>& sid_to_entry) {
    return match_rules(packets, RuleSet({rules.begin(), rules.end()}), sid_to_entry);
}

std::string iso8601_utc(std::int64_t timestamp_us) {
    std::int64_t secs = timestamp_us / 1'000'000;
    std::int64_t micros = timestamp_us % 1'000'000;
    if (micros < 0) {
        micros += 1'000'000;
        --secs;
    }
    const auto t = static_cast<std::time_t>(secs);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<long long>(micros));
    return buf;
}

std::string format_alert(const Alert& a) {
    return "[" + iso8601_utc(a.timestamp_us) + "] [sid:" + std::to_string(a.sid) + "] " + a.msg +
           " {" + std::string(protocol_name(a.protocol)) + "} " + to_string(a.src) + " -> " +
           to_string(a.dst);
}

std::vector<DnsFrequencyRow> dns_frequency_report(std::span<const PacketRecord> packets) {
    std::map<std::string, std::pair<std::size_t, std::set<Ipv4>>> counts;
    for (const auto& p : packets) {
        if (p.protocol != Protocol::UDP || (p.src_port != kDnsPort && p.dst_port != kDnsPort)) continue;
        const auto qname = parse_dns_qname(p.l4_payload);
        if (!qname) continue;
        auto& [n, sources] = counts[*qname];
        ++n;
        sources.insert(p.src_ip);
    }
    std::vector<DnsFrequencyRow> rows;
    for (const auto& [name, value] : counts) rows.push_back({name, value.first, value.second.size()});
    std::stable_sort(rows.begin(), rows.end(),
                     [](const auto& a, const auto& b) { return a.queries > b.queries; });
    return rows;
}

}  // namespace iotscope
