// Chunked parallel execution with deterministic, in-order reduction.
// Workers grab chunk indices from a shared counter and park results in a
// bounded ring of slots; the caller consumes buffers strictly in chunk
// order, so results do not depend on the thread count, and memory stays
// bounded by the window size.

#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace fractfem {

template <typename Buffer>
void orderedChunkReduce(int nChunks, int threads,
                        const std::function<void(int, Buffer&)>& compute,
                        const std::function<void(Buffer&)>& consume) {
  if (nChunks <= 0) return;
  if (threads <= 1) {
    Buffer buf;
    for (int c = 0; c < nChunks; ++c) {
      buf = Buffer();
      compute(c, buf);
      consume(buf);
    }
    return;
  }

  const int window = std::max(2 * threads, 4);
  std::vector<Buffer> slots(window);
  std::vector<int> readyChunk(window, -1);
  std::atomic<int> next{0};
  int front = 0;  // guarded by mtx
  std::mutex mtx;
  std::condition_variable cvReady, cvSpace;

  auto worker = [&]() {
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= nChunks) return;
      {
        std::unique_lock<std::mutex> lk(mtx);
        cvSpace.wait(lk, [&] { return c < front + window; });
      }
      Buffer buf;
      compute(c, buf);
      {
        std::lock_guard<std::mutex> lk(mtx);
        slots[c % window] = std::move(buf);
        readyChunk[c % window] = c;
      }
      cvReady.notify_all();
    }
  };

  const int nw = std::min(threads, nChunks);
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (int t = 0; t < nw; ++t) pool.emplace_back(worker);

  for (int c = 0; c < nChunks; ++c) {
    Buffer buf;
    {
      std::unique_lock<std::mutex> lk(mtx);
      cvReady.wait(lk, [&] { return readyChunk[c % window] == c; });
      buf = std::move(slots[c % window]);
      front = c + 1;
    }
    cvSpace.notify_all();
    consume(buf);
  }
  for (auto& t : pool) t.join();
}

}  // namespace fractfem
