/**
 * View models: pure mappings from C2S responses to what the views render.
 * Nothing here fabricates state; every field traces back to a server reply.
 */

import type {
  AclRule,
  ContactEntry,
  FieldAclRow,
  InstalledModule,
  InterfaceEntry,
  MarketplaceEntry,
} from "./api.js";

export const CARD_FIELDS = [
  "display_name",
  "email",
  "phone",
  "postal_address",
  "org",
  "note",
  "avatar_hash",
] as const;

export type CardField = (typeof CARD_FIELDS)[number];

// ---------------------------------------------------------------------------
// Contacts
// ---------------------------------------------------------------------------

export interface ContactSections {
  inbox: ContactEntry[];
  outgoing: ContactEntry[];
  accepted: ContactEntry[];
  declined: ContactEntry[];
}

export function sectionContacts(entries: ContactEntry[]): ContactSections {
  const pick = (status: ContactEntry["status"]) =>
    entries
      .filter((entry) => entry.status === status)
      .sort((a, b) => b.updated_at - a.updated_at);
  return {
    inbox: pick("pending_in"),
    outgoing: pick("pending_out"),
    accepted: pick("accepted"),
    declined: pick("declined"),
  };
}

// ---------------------------------------------------------------------------
// Marketplace + installed modules
// ---------------------------------------------------------------------------

export type InstallProgress = "idle" | "installing" | "done" | "failed";

export interface ModuleVM {
  moduleId: string;
  name: string;
  version: string;
  apiIds: string[];
  packageHash: string;
  installed: boolean;
  state: InstalledModule["state"] | null;
  progress: InstallProgress;
  error: string | null;
}

export function mergeModules(
  marketplace: MarketplaceEntry[],
  installed: InstalledModule[],
  progress: Map<string, { progress: InstallProgress; error: string | null }> = new Map(),
): ModuleVM[] {
  const byId = new Map(installed.map((m) => [m.manifest.module_id, m]));
  const vms = marketplace.map((entry) => {
    const local = byId.get(entry.module_id);
    const p = progress.get(entry.module_id);
    return {
      moduleId: entry.module_id,
      name: entry.name,
      version: entry.version,
      apiIds: entry.api_ids,
      packageHash: entry.package_hash,
      installed: local !== undefined,
      state: local?.state ?? null,
      progress: p?.progress ?? "idle",
      error: p?.error ?? null,
    };
  });
  // locally installed modules that have left the marketplace still render
  for (const local of installed) {
    if (!vms.some((vm) => vm.moduleId === local.manifest.module_id)) {
      vms.push({
        moduleId: local.manifest.module_id,
        name: local.manifest.name,
        version: local.manifest.version,
        apiIds: local.manifest.api_ids,
        packageHash: local.package_hash,
        installed: true,
        state: local.state,
        progress: "idle",
        error: null,
      });
    }
  }
  return vms.sort((a, b) => a.name.localeCompare(b.name) || a.moduleId.localeCompare(b.moduleId));
}

// ---------------------------------------------------------------------------
// ACL editor
// ---------------------------------------------------------------------------

export function sortRules(rules: AclRule[]): AclRule[] {
  return [...rules].sort(
    (a, b) => a.priority - b.priority || a.rule_id.localeCompare(b.rule_id),
  );
}

/** Swap the priorities of a rule and its neighbor: the editor's reorder
 * buttons become two PUTs, nothing client-side. */
export function reorderPlan(
  rules: AclRule[],
  ruleId: string,
  direction: "up" | "down",
): Array<{ ruleId: string; priority: number }> {
  const ordered = sortRules(rules);
  const index = ordered.findIndex((rule) => rule.rule_id === ruleId);
  const other = direction === "up" ? index - 1 : index + 1;
  if (index < 0 || other < 0 || other >= ordered.length) return [];
  const a = ordered[index];
  const b = ordered[other];
  if (a.priority === b.priority) {
    // equal priorities: nudge to create an actual swap
    return [
      { ruleId: a.rule_id, priority: b.priority + (direction === "up" ? -1 : 1) },
    ];
  }
  return [
    { ruleId: a.rule_id, priority: b.priority },
    { ruleId: b.rule_id, priority: a.priority },
  ];
}

// ---------------------------------------------------------------------------
// Card editor: per-subject field disclosure matrix
// ---------------------------------------------------------------------------

export interface DisclosureMatrix {
  subjects: string[]; // row order
  allowed: Map<string, Set<CardField>>;
}

/** First-match row semantics collapse to one set per subject for the grid:
 * a subject sees a field iff its first matching row allows it. */
export function rowsToMatrix(rows: FieldAclRow[], knownSubjects: string[] = []): DisclosureMatrix {
  const subjects = [...new Set([...rows.map(([subject]) => subject), ...knownSubjects])];
  const allowed = new Map<string, Set<CardField>>();
  for (const subject of subjects) {
    const set = new Set<CardField>();
    for (const field of CARD_FIELDS) {
      for (const [rowSubject, rowField, effect] of rows) {
        const subjectMatches =
          rowSubject === "*" || rowSubject === subject || (rowSubject === "contacts" && subject === "contacts");
        if (!subjectMatches) continue;
        if (rowField !== "*" && rowField !== field) continue;
        if (effect === "allow") set.add(field);
        break; // first matching row decides
      }
    }
    allowed.set(subject, set);
  }
  return { subjects, allowed };
}

export function matrixToRows(matrix: DisclosureMatrix): FieldAclRow[] {
  const rows: FieldAclRow[] = [];
  for (const subject of matrix.subjects) {
    const set = matrix.allowed.get(subject) ?? new Set();
    for (const field of CARD_FIELDS) {
      if (set.has(field)) rows.push([subject, field, "allow"]);
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Interfaces
// ---------------------------------------------------------------------------

export function moduleApis(interfaces: InterfaceEntry[]): InterfaceEntry[] {
  return interfaces.filter((entry) => entry.api_id !== "base");
}
