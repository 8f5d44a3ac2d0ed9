import { describe, expect, it } from "vitest";

import { encodeFrame, FrameDecoder } from "../src/protocol.js";

describe("wire framing", () => {
  it("round-trips a message through encode/decode", () => {
    const frame = encodeFrame({ type: "hello" });
    const view = new DataView(frame.buffer);
    expect(view.getUint32(0, false)).toBe(frame.length - 4);

    const decoder = new FrameDecoder();
    const messages = decoder.feed(frame);
    expect(messages).toEqual([{ type: "hello" }]);
  });

  it("reassembles frames split across arbitrary chunk boundaries", () => {
    const a = encodeFrame({ type: "hello" });
    const b = encodeFrame({ type: "list_robots" });
    const joined = new Uint8Array(a.length + b.length);
    joined.set(a);
    joined.set(b, a.length);

    for (let cut = 1; cut < joined.length; cut++) {
      const decoder = new FrameDecoder();
      const messages = [
        ...decoder.feed(joined.subarray(0, cut)),
        ...decoder.feed(joined.subarray(cut)),
      ];
      expect(messages).toEqual([{ type: "hello" }, { type: "list_robots" }]);
    }
  });

  it("buffers until a frame is complete", () => {
    const frame = encodeFrame({ type: "hello" });
    const decoder = new FrameDecoder();
    expect(decoder.feed(frame.subarray(0, 2))).toEqual([]);
    expect(decoder.feed(frame.subarray(2, 5))).toEqual([]);
    expect(decoder.feed(frame.subarray(5))).toEqual([{ type: "hello" }]);
  });
});
