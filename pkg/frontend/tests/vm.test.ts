import { describe, expect, it } from "vitest";

import type { AclRule, ContactEntry, InstalledModule, MarketplaceEntry } from "../src/api.js";
import {
  CARD_FIELDS,
  matrixToRows,
  mergeModules,
  moduleApis,
  reorderPlan,
  rowsToMatrix,
  sectionContacts,
  sortRules,
} from "../src/vm.js";

const contact = (overrides: Partial<ContactEntry>): ContactEntry => ({
  address: "0x" + "11".repeat(20),
  name: "peer",
  status: "accepted",
  updated_at: 1,
  ...overrides,
});

describe("sectionContacts", () => {
  it("buckets by status and sorts newest first", () => {
    const sections = sectionContacts([
      contact({ status: "pending_in", name: "old", updated_at: 1 }),
      contact({ status: "pending_in", name: "new", updated_at: 2 }),
      contact({ status: "pending_out", name: "out" }),
      contact({ status: "declined", name: "no" }),
    ]);
    expect(sections.inbox.map((e) => e.name)).toEqual(["new", "old"]);
    expect(sections.outgoing).toHaveLength(1);
    expect(sections.accepted).toHaveLength(0);
    expect(sections.declined).toHaveLength(1);
  });
});

describe("mergeModules", () => {
  const marketplaceEntry: MarketplaceEntry = {
    module_id: "0x" + "aa".repeat(20),
    org_id: "0x" + "bb".repeat(20),
    name: "contact-db",
    version: "1.0.0",
    package_uri: "http://pkgs/contact.bpk",
    package_hash: "0x" + "cc".repeat(32),
    api_ids: ["0x" + "dd".repeat(20)],
    installed: false,
  };
  const installedModule: InstalledModule = {
    manifest: {
      module_id: marketplaceEntry.module_id,
      name: "contact-db",
      version: "1.0.0",
      api_ids: marketplaceEntry.api_ids,
      entrypoint: "contact-db",
      min_protocol: "1.0",
    },
    state: "running",
    install_time: 5,
    package_hash: marketplaceEntry.package_hash,
  };

  it("marks marketplace entries with their local state", () => {
    const vms = mergeModules([marketplaceEntry], [installedModule]);
    expect(vms).toHaveLength(1);
    expect(vms[0].installed).toBe(true);
    expect(vms[0].state).toBe("running");
  });

  it("keeps locally installed modules that left the marketplace", () => {
    const vms = mergeModules([], [installedModule]);
    expect(vms).toHaveLength(1);
    expect(vms[0].name).toBe("contact-db");
  });

  it("carries install progress and errors", () => {
    const progress = new Map([
      [marketplaceEntry.module_id, { progress: "failed" as const, error: "HashMismatch: nope" }],
    ]);
    const vms = mergeModules([marketplaceEntry], [], progress);
    expect(vms[0].progress).toBe("failed");
    expect(vms[0].error).toContain("HashMismatch");
  });
});

describe("acl ordering", () => {
  const rule = (id: string, priority: number): AclRule => ({
    rule_id: id,
    subject: "*",
    api_id: "*",
    path_pattern: "*",
    action: "read",
    effect: "allow",
    priority,
  });

  it("sorts by priority then id", () => {
    const sorted = sortRules([rule("b", 10), rule("a", 10), rule("c", 1)]);
    expect(sorted.map((r) => r.rule_id)).toEqual(["c", "a", "b"]);
  });

  it("plans a swap of priorities for reordering", () => {
    const rules = [rule("a", 10), rule("b", 20), rule("c", 30)];
    expect(reorderPlan(rules, "b", "up")).toEqual([
      { ruleId: "b", priority: 10 },
      { ruleId: "a", priority: 20 },
    ]);
    expect(reorderPlan(rules, "a", "up")).toEqual([]);
    expect(reorderPlan(rules, "c", "down")).toEqual([]);
  });
});

describe("disclosure matrix", () => {
  const subject = "0x" + "ee".repeat(20);

  it("round-trips rows through the matrix", () => {
    const rows: Array<[string, string, "allow" | "deny"]> = [
      [subject, "display_name", "allow"],
      [subject, "email", "allow"],
      ["contacts", "display_name", "allow"],
    ];
    const matrix = rowsToMatrix(rows);
    expect(matrix.allowed.get(subject)).toEqual(new Set(["display_name", "email"]));
    expect(matrix.allowed.get("contacts")).toEqual(new Set(["display_name"]));

    const back = matrixToRows(matrix);
    expect(back).toContainEqual([subject, "display_name", "allow"]);
    expect(back).toContainEqual([subject, "email", "allow"]);
    expect(back.filter(([s]) => s === subject)).toHaveLength(2);
  });

  it("honors first-match semantics including denies", () => {
    const rows: Array<[string, string, "allow" | "deny"]> = [
      [subject, "email", "deny"],
      ["*", "*", "allow"],
    ];
    const matrix = rowsToMatrix(rows, [subject, "someone-else"]);
    const mine = matrix.allowed.get(subject)!;
    expect(mine.has("email")).toBe(false);
    expect(mine.has("phone")).toBe(true);
    expect(matrix.allowed.get("someone-else")!.has("email")).toBe(true);
  });

  it("lists known subjects even without rows", () => {
    const matrix = rowsToMatrix([], ["contacts"]);
    expect(matrix.subjects).toContain("contacts");
    expect(matrix.allowed.get("contacts")!.size).toBe(0);
  });

  it("covers the full fixed field set", () => {
    expect(CARD_FIELDS).toHaveLength(7);
  });
});

describe("moduleApis", () => {
  it("excludes the base entry", () => {
    const entries = moduleApis([
      { api_id: "base", name: "blade-base", version: "1.0" },
      { api_id: "0x" + "ff".repeat(20), name: "contacts", version: "1.0.0" },
    ]);
    expect(entries).toHaveLength(1);
    expect(entries[0].name).toBe("contacts");
  });
});
