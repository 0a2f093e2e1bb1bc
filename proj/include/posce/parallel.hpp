#pragma once

#include <exception>
#include <mutex>
#include <utility>

namespace posce {

/// Exceptions must not cross an OpenMP region boundary. Loop bodies run
/// through an ExceptionTrap; the first captured exception is rethrown once
/// the region has joined.
class ExceptionTrap {
public:
    template <typename F>
    void run(F&& body) noexcept {
        try {
            std::forward<F>(body)();
        } catch (...) {
            std::lock_guard<std::mutex> lock(mutex_);
            if (!first_) first_ = std::current_exception();
        }
    }

    void rethrow() const {
        if (first_) std::rethrow_exception(first_);
    }

private:
    std::mutex mutex_;
    std::exception_ptr first_;
};

}  // namespace posce
