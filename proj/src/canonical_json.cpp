#include "ctfminer/canonical_json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace ctfminer {

namespace {

void append_number(std::string& out, double v) {
    if (!std::isfinite(v)) throw std::invalid_argument("canonical JSON cannot encode non-finite numbers");
    if (v == 0.0) {
        out += '0';
        return;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    out += buf;
}

void append_string(std::string& out, const std::string& s) {
    // nlohmann's escaping is already deterministic; reuse it for strings
    out += Json(s).dump(-1, ' ', false, Json::error_handler_t::replace);
}

void dump_into(std::string& out, const Json& v) {
    switch (v.type()) {
        case Json::value_t::null: out += "null"; break;
        case Json::value_t::boolean: out += v.get<bool>() ? "true" : "false"; break;
        case Json::value_t::number_integer: out += std::to_string(v.get<std::int64_t>()); break;
        case Json::value_t::number_unsigned: out += std::to_string(v.get<std::uint64_t>()); break;
        case Json::value_t::number_float: append_number(out, v.get<double>()); break;
        case Json::value_t::string: append_string(out, v.get_ref<const std::string&>()); break;
        case Json::value_t::array: {
            out += '[';
            bool first = true;
            for (const auto& item : v) {
                if (!first) out += ',';
                first = false;
                dump_into(out, item);
            }
            out += ']';
            break;
        }
        case Json::value_t::object: {
            // nlohmann::json objects are std::map-backed, so iteration is key-sorted
            out += '{';
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {
                if (!first) out += ',';
                first = false;
                append_string(out, it.key());
                out += ':';
                dump_into(out, it.value());
            }
            out += '}';
            break;
        }
        case Json::value_t::binary:
        case Json::value_t::discarded: throw std::invalid_argument("canonical JSON cannot encode binary values");
    }
}

}  // namespace

std::string canonical_dump(const Json& value) {
    std::string out;
    dump_into(out, value);
    return out;
}

double canonical_number(double v) {
    if (v == 0.0) return 0.0;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return std::strtod(buf, nullptr);
}

}  // namespace ctfminer
