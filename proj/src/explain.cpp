#include "dcvd/explain.hpp"

#include "dcvd/lexer.hpp"
#include "dcvd/util.hpp"

#include <json.hpp>

#include <httplib.h>

#include <chrono>
#include <filesystem>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace dcvd {

using nlohmann::json;

namespace {

constexpr const char* kTemplateVersion = "v1";

constexpr const char* kPromptTemplate =
    R"(You are an expert software security and program analysis assistant.

Given the following source code, generate a concise natural-language explanation of its functionality and potential security-relevant behaviors. The explanation will be used as semantic input for a vulnerability detection and localization model, so it should focus on observable program behavior rather than unsupported speculation.

Please analyze the code from the following aspects:

1. Functionality:
Describe the main purpose of the function and what task it performs.

2. Inputs and Outputs:
Identify important parameters, external inputs, return values, and output behaviors.

3. Control Logic:
Describe key branches, loops, conditions, and execution paths that affect the behavior of the function.

4. Data Flow:
Describe how important data values propagate through the function, especially from inputs to memory operations, pointer operations, array accesses, file operations, system calls, or other sensitive operations.

5. Security-Relevant Behaviors:
Identify potential security-relevant operations, such as boundary checks, null checks, memory allocation or release, pointer dereference, buffer access, arithmetic computation, authentication checks, and error handling.

6. Potential Risk Indicators:
Mention suspicious or risky behaviors only if they are directly observable from the code. Do not overclaim vulnerability existence.

Source Code:
<Code>

Output format:
Functionality: <brief description>
Inputs and Outputs: <brief description>
Control Logic: <brief description>
Data Flow: <brief description>
Security-Relevant Behaviors: <brief description>
Potential Risk Indicators: <brief description or N/A>)";

const std::set<std::string>& risky_calls() {
    static const std::set<std::string> calls = {
        "strcpy",  "strcat",  "sprintf", "vsprintf", "gets",   "scanf",  "sscanf",
        "memcpy",  "memmove", "memset",  "alloca",   "malloc", "calloc", "realloc",
        "free",    "system",  "popen",   "exec",     "execl",  "execve", "strncpy",
        "strncat", "snprintf"};
    return calls;
}

bool has_all_sections(const std::string& text) {
    for (const auto& s : explanation_sections())
        if (text.find(s + ":") == std::string::npos) return false;
    return true;
}

std::string cache_path_for(const std::string& dir, const std::string& hash) {
    return (std::filesystem::path(dir) / (hash + ".json")).string();
}

}  // namespace

const std::vector<std::string>& explanation_sections() {
    static const std::vector<std::string> sections = {
        "Functionality",          "Inputs and Outputs",          "Control Logic",
        "Data Flow",              "Security-Relevant Behaviors", "Potential Risk Indicators"};
    return sections;
}

std::string prompt_template() { return kPromptTemplate; }

std::string build_prompt(const std::string& source) {
    std::string prompt = kPromptTemplate;
    const std::string placeholder = "<Code>";
    std::size_t pos = prompt.find(placeholder);
    if (pos == std::string::npos) throw std::logic_error("prompt template lacks <Code> placeholder");
    prompt.replace(pos, placeholder.size(), source);
    return prompt;
}

std::string prompt_hash(const std::string& source) {
    return sha256_hex(std::string(kTemplateVersion) + "\x1f" + source);
}

// ---------------------------------------------------------------------------

std::string FixtureProvider::generate(const std::string& source) {
    calls_.fetch_add(1);

    std::vector<Token> toks = lex(source);
    std::string fn_name = "the function";
    std::set<std::string> calls, risky, params;
    int branches = 0, loops = 0, returns = 0, derefs = 0, subscripts = 0;
    bool allocs = false, frees = false;

    for (std::size_t i = 0; i < toks.size(); ++i) {
        const Token& t = toks[i];
        if (t.kind == TokenKind::Identifier && i + 1 < toks.size() && toks[i + 1].text == "(") {
            if (fn_name == "the function")
                fn_name = "'" + t.text + "'";
            else {
                calls.insert(t.text);
                if (risky_calls().count(t.text)) risky.insert(t.text);
                if (t.text.find("alloc") != std::string::npos) allocs = true;
                if (t.text == "free") frees = true;
            }
        }
        if (t.kind == TokenKind::Keyword) {
            if (t.text == "if" || t.text == "switch") ++branches;
            if (t.text == "for" || t.text == "while" || t.text == "do") ++loops;
            if (t.text == "return") ++returns;
        }
        if (t.text == "->" || t.text == "*") ++derefs;
        if (t.text == "[") ++subscripts;
    }

    auto join = [](const std::set<std::string>& items, std::size_t cap) {
        std::string out;
        std::size_t k = 0;
        for (const auto& s : items) {
            if (k++ >= cap) {
                out += ", ...";
                break;
            }
            if (!out.empty()) out += ", ";
            out += s;
        }
        return out;
    };

    std::ostringstream out;
    out << "Functionality: " << fn_name << " implements a routine with " << returns
        << " return point(s)";
    if (!calls.empty()) out << " that delegates to " << join(calls, 6);
    out << ".\n";
    out << "Inputs and Outputs: the function takes its declared parameters and produces "
        << (returns > 0 ? "a return value" : "no explicit return value") << ".\n";
    out << "Control Logic: " << branches << " conditional branch(es) and " << loops
        << " loop(s) shape the execution paths.\n";
    out << "Data Flow: values propagate through " << derefs << " pointer operation(s) and "
        << subscripts << " array subscript(s).\n";
    out << "Security-Relevant Behaviors: ";
    if (allocs || frees) {
        out << "memory is " << (allocs ? "allocated" : "") << (allocs && frees ? " and " : "")
            << (frees ? "released" : "") << " within the function";
    } else {
        out << "no explicit memory management observed";
    }
    out << "; " << branches << " guard condition(s) present.\n";
    out << "Potential Risk Indicators: ";
    if (!risky.empty())
        out << "calls to " << join(risky, 6) << " may be unsafe without bounds validation.";
    else
        out << "N/A";
    return out.str();
}

// ---------------------------------------------------------------------------

std::string HttpProvider::generate(const std::string& source) {
    const char* key = std::getenv(opts_.api_key_env.c_str());
    if (!key || !*key)
        throw ProviderError("live provider: environment variable " + opts_.api_key_env + " is not set");
    if (opts_.base_url.empty()) throw ProviderError("live provider: base_url is not configured");

    json payload = {
        {"model", opts_.model},
        {"messages", json::array({json{{"role", "user"}, {"content", build_prompt(source)}}})},
        {"temperature", 0.0},
    };
    std::string body = payload.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= opts_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(std::chrono::milliseconds(250 * (1 << (attempt - 1))));
        httplib::Client client(opts_.base_url);
        client.set_connection_timeout(opts_.timeout_seconds, 0);
        client.set_read_timeout(opts_.timeout_seconds, 0);
        httplib::Headers headers = {{"Authorization", std::string("Bearer ") + key}};
        auto res = client.Post(opts_.path, headers, body, "application/json");
        if (!res) {
            last_error = "transport error " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw ProviderError("live provider: HTTP " + std::to_string(res->status) + ": " + res->body);
        try {
            json reply = json::parse(res->body);
            return reply.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const std::exception& e) {
            throw ProviderError(std::string("live provider: unexpected response shape: ") + e.what());
        }
    }
    throw ProviderError("live provider: exhausted retries (" + last_error + ")");
}

// ---------------------------------------------------------------------------

ExplanationService::ExplanationService(std::shared_ptr<ExplanationProvider> provider,
                                       std::string cache_dir)
    : provider_(std::move(provider)), cache_dir_(std::move(cache_dir)) {
    if (!cache_dir_.empty()) std::filesystem::create_directories(cache_dir_);
}

ExplanationRecord ExplanationService::explain(const std::string& function_id, const std::string& source) {
    if (trim(source).empty())
        throw std::invalid_argument("explain: empty source for function " + function_id);

    ExplanationRecord rec;
    rec.function_id = function_id;
    rec.prompt_hash = prompt_hash(source);

    if (!cache_dir_.empty()) {
        std::string path = cache_path_for(cache_dir_, rec.prompt_hash);
        if (std::filesystem::exists(path)) {
            json j = json::parse(read_file(path));
            rec.text = j.at("text").get<std::string>();
            rec.provider = j.at("provider").get<std::string>();
            rec.malformed = !has_all_sections(rec.text);
            return rec;
        }
    }

    try {
        rec.text = provider_->generate(source);
    } catch (const ProviderError& e) {
        throw ProviderError("explain failed for function " + function_id + ": " + e.what());
    }
    rec.provider = provider_->name();
    rec.malformed = !has_all_sections(rec.text);

    if (!cache_dir_.empty()) {
        json j = {{"prompt_hash", rec.prompt_hash},
                  {"text", rec.text},
                  {"provider", rec.provider},
                  {"timestamp", static_cast<std::int64_t>(
                                    std::chrono::duration_cast<std::chrono::seconds>(
                                        std::chrono::system_clock::now().time_since_epoch())
                                        .count())}};
        atomic_write_file(cache_path_for(cache_dir_, rec.prompt_hash), j.dump(2));
    }
    return rec;
}

std::vector<ExplanationRecord> ExplanationService::explain_all(
    const std::vector<std::pair<std::string, std::string>>& items, int max_in_flight,
    int min_interval_ms) {
    if (max_in_flight < 1) max_in_flight = 1;
    std::vector<ExplanationRecord> out(items.size());
    std::vector<std::string> errors;
    std::mutex mu;
    std::size_t next = 0;
    auto last_start = std::chrono::steady_clock::now() - std::chrono::hours(1);

    auto worker = [&] {
        for (;;) {
            std::size_t idx;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (next >= items.size()) return;
                idx = next++;
                if (min_interval_ms > 0) {
                    auto now = std::chrono::steady_clock::now();
                    auto earliest = last_start + std::chrono::milliseconds(min_interval_ms);
                    if (now < earliest) std::this_thread::sleep_for(earliest - now);
                    last_start = std::chrono::steady_clock::now();
                }
            }
            try {
                out[idx] = explain(items[idx].first, items[idx].second);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(mu);
                errors.emplace_back(e.what());
            }
        }
    };

    std::vector<std::thread> threads;
    int n_threads = std::min<int>(max_in_flight, static_cast<int>(items.size()));
    for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();

    if (!errors.empty()) throw ProviderError("explain_all: " + errors.front());
    return out;
}

}  // namespace dcvd
