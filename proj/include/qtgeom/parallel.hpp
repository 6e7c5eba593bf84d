#pragma once

#include <algorithm>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace qtgeom {

/// out[k] = f(in[k]) on a small pool of threads. Results keep input order; if
/// any evaluation throws, the failure with the smallest index is rethrown.
template <typename T, typename F>
auto parallel_map(const std::vector<T>& in, F&& f, unsigned threads = 0) {
    using R = std::decay_t<decltype(f(in.front()))>;
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(in.size(), 1)));
    std::vector<std::optional<R>> slots(in.size());
    std::vector<std::exception_ptr> errors(in.size());
    const auto work = [&](unsigned w) {
        for (std::size_t k = w; k < in.size(); k += threads) {
            try {
                slots[k] = f(in[k]);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        work(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    std::vector<R> out;
    out.reserve(in.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

}  // namespace qtgeom
