import { describe, expect, it } from "vitest";

import {
  findGridJob,
  gridSpec,
  initialState,
  jobKey,
  markCancelled,
  mayRender,
  parsePGrid,
  rememberJob,
  setDataset,
} from "../src/state.js";

describe("jobKey", () => {
  it("is canonical under option key order", () => {
    const a = jobKey("d1", "reitsma", { method: "ml", curve: "sroc" });
    const b = jobKey("d1", "reitsma", { curve: "sroc", method: "ml" });
    expect(a).toBe(b);
  });

  it("distinguishes datasets and kinds", () => {
    expect(jobKey("d1", "reitsma", {})).not.toBe(jobKey("d2", "reitsma", {}));
    expect(jobKey("d1", "reitsma", {})).not.toBe(jobKey("d1", "glmm", {}));
  });
});

describe("grid cache", () => {
  it("reuses a grid job whose p-values cover the request", () => {
    let s = setDataset(initialState(), "d1", 69, []);
    const bigSpec = { ...gridSpec(s), p_values: [1, 0.8, 0.6, 0.4] };
    s = rememberJob(s, "sa_grid", bigSpec, "job-big");

    const subset = { ...gridSpec(s), p_values: [1, 0.6] };
    expect(findGridJob(s, subset)).toBe("job-big");

    const superset = { ...gridSpec(s), p_values: [1, 0.8, 0.6, 0.4, 0.2] };
    expect(findGridJob(s, superset)).toBeNull();

    const otherCurve = { ...subset, curve: "hsroc" as const };
    expect(findGridJob(s, otherCurve)).toBeNull();
  });

  it("new dataset invalidates the cache", () => {
    let s = setDataset(initialState(), "d1", 69, []);
    s = rememberJob(s, "sa_grid", gridSpec(s), "job-1");
    s = setDataset(s, "d2", 10, []);
    expect(findGridJob(s, gridSpec(s))).toBeNull();
  });
});

describe("cancellation", () => {
  it("cancelled jobs may never render and leave the cache", () => {
    let s = setDataset(initialState(), "d1", 69, []);
    s = rememberJob(s, "sa_grid", gridSpec(s), "job-1");
    expect(mayRender(s, "job-1")).toBe(true);
    s = markCancelled(s, "job-1");
    expect(mayRender(s, "job-1")).toBe(false);
    expect(Object.values(s.jobCache)).not.toContain("job-1");
  });
});

describe("parsePGrid", () => {
  it("accepts a descending grid starting at 1", () => {
    expect(parsePGrid("1, 0.8,0.6, 0.4")).toEqual([1, 0.8, 0.6, 0.4]);
  });
  it("rejects bad grids with a message", () => {
    expect(typeof parsePGrid("0.8, 0.6")).toBe("string");
    expect(typeof parsePGrid("1, 0.6, 0.8")).toBe("string");
    expect(typeof parsePGrid("1, 0")).toBe("string");
    expect(typeof parsePGrid("1, x")).toBe("string");
  });
});
