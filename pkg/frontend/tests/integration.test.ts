/**
 * End-to-end: the UI's client layer against two live nodes (real HTTP).
 *
 * Covers the release flows: login; a pending connection request (injected on
 * the peer) shows up within one poll interval; accepting updates both nodes;
 * installing the contact module from the marketplace surfaces its api in the
 * interfaces view; a corrupted package renders a HashMismatch error.
 */

import { spawn, type ChildProcess } from "node:child_process";
import { fileURLToPath } from "node:url";
import path from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, BladeClient } from "../src/api.js";
import { mergeModules, sectionContacts } from "../src/vm.js";

interface HarnessInfo {
  alice: { url: string; password: string };
  bob: { url: string; password: string };
  bobAddress: string;
  aliceAddress: string;
  moduleId: string;
  apiId: string;
  packageSource: string;
  corruptedSource: string;
}

let harness: ChildProcess;
let info: HarnessInfo;

beforeAll(async () => {
  const script = path.join(
    path.dirname(fileURLToPath(import.meta.url)),
    "..",
    "testsupport",
    "two_node_harness.py",
  );
  harness = spawn("python3", [script], { stdio: ["pipe", "pipe", "pipe"] });
  info = await new Promise<HarnessInfo>((resolve, reject) => {
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`harness timeout: ${buffer}`)), 30_000);
    harness.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      if (buffer.includes("READY")) {
        clearTimeout(timer);
        resolve(JSON.parse(buffer.slice(0, buffer.indexOf("\n"))) as HarnessInfo);
      }
    });
    harness.stderr!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
    });
    harness.on("exit", (code) => reject(new Error(`harness exited ${code}: ${buffer}`)));
  });
}, 40_000);

afterAll(() => {
  harness?.stdin?.end();
  harness?.kill();
});

describe("admin UI flows against live nodes", () => {
  it("rejects a wrong password with an inline-able error", async () => {
    const client = new BladeClient(info.alice.url);
    await expect(client.login("admin", "wrong")).rejects.toMatchObject({
      code: "Unauthenticated",
    });
    expect(client.token).toBeNull();
  });

  it("login -> inbox shows the injected request within one poll interval", async () => {
    const client = new BladeClient(info.alice.url);
    const identity = await client.login("admin", info.alice.password);
    expect(identity.name).toBe("alice");

    const started = Date.now();
    let inbox = sectionContacts(await client.contacts()).inbox;
    while (inbox.length === 0 && Date.now() - started < 5_000) {
      await new Promise((resolve) => setTimeout(resolve, 250));
      inbox = sectionContacts(await client.contacts()).inbox;
    }
    expect(Date.now() - started).toBeLessThan(5_000);
    expect(inbox).toHaveLength(1);
    expect(inbox[0].name).toBe("bob");
    expect(inbox[0].request_message).toContain("bob");
  });

  it("accepting moves the row to contacts on both nodes", async () => {
    const alice = new BladeClient(info.alice.url);
    await alice.login("admin", info.alice.password);
    const entry = await alice.respondContact(info.bobAddress, "accept");
    expect(entry.status).toBe("accepted");

    const sections = sectionContacts(await alice.contacts());
    expect(sections.inbox).toHaveLength(0);
    expect(sections.accepted.map((e) => e.name)).toContain("bob");

    // the peer converges too (response message travels over real HTTP)
    const bob = new BladeClient(info.bob.url);
    await bob.login("admin", info.bob.password);
    const deadline = Date.now() + 5_000;
    let accepted = sectionContacts(await bob.contacts()).accepted;
    while (!accepted.some((e) => e.address === info.aliceAddress) && Date.now() < deadline) {
      await new Promise((resolve) => setTimeout(resolve, 250));
      accepted = sectionContacts(await bob.contacts()).accepted;
    }
    expect(accepted.map((e) => e.address)).toContain(info.aliceAddress);
  });

  it("marketplace install surfaces the api in the interfaces view", async () => {
    const client = new BladeClient(info.alice.url);
    await client.login("admin", info.alice.password);

    const hits = await client.marketplaceSearch("contact");
    expect(hits).toHaveLength(1);
    expect(hits[0].module_id).toBe(info.moduleId);
    expect(hits[0].installed).toBe(false);

    const installed = await client.installModule(info.moduleId, info.packageSource);
    expect(installed.state).toBe("running");

    const interfaces = await client.interfaces();
    expect(interfaces.map((e) => e.api_id)).toContain(info.apiId);

    const vms = mergeModules(await client.marketplaceSearch(""), await client.modules());
    expect(vms.find((vm) => vm.moduleId === info.moduleId)?.installed).toBe(true);

    // filter by api id narrows to the same module
    const filtered = await client.marketplaceSearch("", info.apiId);
    expect(filtered.map((m) => m.module_id)).toEqual([info.moduleId]);
  });

  it("a corrupted package renders HashMismatch", async () => {
    const bob = new BladeClient(info.bob.url);
    await bob.login("admin", info.bob.password);
    try {
      await bob.installModule(info.moduleId, info.corruptedSource);
      expect.unreachable("install of a corrupted package must fail");
    } catch (error) {
      expect(error).toBeInstanceOf(ApiError);
      expect((error as ApiError).code).toBe("HashMismatch");
    }
    // nothing half-installed: interfaces unchanged on bob
    const interfaces = await bob.interfaces();
    expect(interfaces.map((e) => e.api_id)).not.toContain(info.apiId);
  });
});
