#include "fundbasket/http.hpp"

#ifdef FUNDBASKET_WITH_TLS
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <stdexcept>
#include <thread>

namespace fundbasket::http {

namespace {

class HttplibTransport final : public Transport {
public:
    explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

    Response send(const Request& request) override {
        // scheme://host/path?query
        const auto scheme_end = request.url.find("://");
        if (scheme_end == std::string::npos) return {0, {}, "malformed url " + request.url};
        const auto path_start = request.url.find('/', scheme_end + 3);
        const auto origin = request.url.substr(0, path_start);
        const auto path = path_start == std::string::npos ? std::string("/") : request.url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(timeout_);
        client.set_read_timeout(timeout_);
        client.set_follow_location(true);

        httplib::Headers headers;
        std::string content_type = "application/json";
        for (const auto& [k, v] : request.headers) {
            if (k == "Content-Type")
                content_type = v;
            else
                headers.emplace(k, v);
        }

        httplib::Result result = request.method == "POST"
                                     ? client.Post(path, headers, request.body, content_type)
                                     : client.Get(path, headers);
        if (!result) return {0, {}, httplib::to_string(result.error())};
        return {result->status, result->body, {}};
    }

private:
    std::chrono::seconds timeout_;
};

}  // namespace

std::unique_ptr<Transport> make_default_transport(std::chrono::seconds timeout) {
#ifndef FUNDBASKET_WITH_TLS
    throw std::runtime_error("built without TLS support; EDGAR and OpenFIGI require HTTPS");
#endif
    return std::make_unique<HttplibTransport>(timeout);
}

RateLimiter::RateLimiter(double requests_per_second)
    : interval_(requests_per_second > 0
                    ? std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                          std::chrono::duration<double>(1.0 / requests_per_second))
                    : std::chrono::steady_clock::duration::zero()) {}

void RateLimiter::acquire() {
    std::chrono::steady_clock::time_point wake;
    {
        std::lock_guard lock(mutex_);
        const auto now = std::chrono::steady_clock::now();
        wake = std::max(now, next_);
        next_ = wake + interval_;
    }
    std::this_thread::sleep_until(wake);
}

Response send_with_retry(Transport& transport, const Request& request, const RetryPolicy& policy,
                         RateLimiter* limiter) {
    Response last;
    auto delay = policy.base_delay;
    for (int attempt = 1; attempt <= std::max(1, policy.max_attempts); ++attempt) {
        if (limiter) limiter->acquire();
        last = transport.send(request);
        if (last.ok() || !last.retryable()) return last;
        if (attempt == policy.max_attempts) break;
        if (policy.sleep)
            policy.sleep(delay);
        else
            std::this_thread::sleep_for(delay);
        delay *= 2;
    }
    return last;
}

}  // namespace fundbasket::http
