#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <vector>

namespace dcvd {

struct ProviderError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExplanationRecord {
    std::string function_id;
    std::string prompt_hash;
    std::string text;
    std::string provider;   // "live" or "fixture"
    bool malformed = false; // section headings missing; text kept verbatim
};

/// The six headings every well-formed explanation carries, in order.
const std::vector<std::string>& explanation_sections();

std::string prompt_template();
std::string build_prompt(const std::string& source);
/// Content digest over (template version, source text).
std::string prompt_hash(const std::string& source);

class ExplanationProvider {
public:
    virtual ~ExplanationProvider() = default;
    virtual std::string name() const = 0;
    virtual std::string generate(const std::string& source) = 0;
};

/// Deterministic offline provider. Emits the six template sections from
/// shallow source statistics; counts invocations so tests can assert cache
/// behaviour.
class FixtureProvider : public ExplanationProvider {
public:
    std::string name() const override { return "fixture"; }
    std::string generate(const std::string& source) override;
    int call_count() const { return calls_.load(); }

private:
    std::atomic<int> calls_{0};
};

/// Chat-completion client over HTTP. Base URL and model come from config,
/// the API key from an environment variable. Retries transient failures a
/// bounded number of times.
class HttpProvider : public ExplanationProvider {
public:
    struct Options {
        std::string base_url;               // e.g. https://api.example.com
        std::string path = "/v1/chat/completions";
        std::string model;
        std::string api_key_env = "DCVD_API_KEY";
        int max_retries = 3;
        int timeout_seconds = 60;
    };

    explicit HttpProvider(Options opts) : opts_(std::move(opts)) {}
    std::string name() const override { return "live"; }
    std::string generate(const std::string& source) override;

private:
    Options opts_;
};

/// Caching front end over a provider. Cache entries are content-addressed
/// files cache_dir/<hash>.json written atomically; a hit is bit-exact and
/// never touches the provider.
class ExplanationService {
public:
    ExplanationService(std::shared_ptr<ExplanationProvider> provider, std::string cache_dir);

    ExplanationRecord explain(const std::string& function_id, const std::string& source);

    /// Bounded-concurrency batch: at most max_in_flight provider requests at
    /// once, request starts spaced >= min_interval_ms apart.
    std::vector<ExplanationRecord> explain_all(const std::vector<std::pair<std::string, std::string>>& items,
                                               int max_in_flight = 4, int min_interval_ms = 0);

    const std::string& cache_dir() const { return cache_dir_; }
    ExplanationProvider& provider() { return *provider_; }

private:
    std::shared_ptr<ExplanationProvider> provider_;
    std::string cache_dir_;  // empty disables caching
};

}  // namespace dcvd
