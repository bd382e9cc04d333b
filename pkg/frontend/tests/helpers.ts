/** Small DOM polling helpers shared by the test files. */

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

/** Poll a probe until it returns a truthy value or the deadline passes. */
export async function until<T>(
  probe: () => T | Promise<T>,
  timeoutMs = 15000,
  stepMs = 20,
): Promise<NonNullable<T>> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    const value = await probe();
    if (value) {
      return value as NonNullable<T>;
    }
    if (Date.now() > deadline) {
      throw new Error("timed out waiting for a condition");
    }
    await sleep(stepMs);
  }
}

/** Buttons the user can actually press right now. */
export function activeButtons(scope: ParentNode): HTMLButtonElement[] {
  return Array.from(scope.querySelectorAll<HTMLButtonElement>(
    ".controls:not(.retired) button:not([disabled])"));
}

export function clickByValue(scope: ParentNode, value: string): void {
  const button = activeButtons(scope).find((b) => b.dataset.value === value);
  if (!button) {
    throw new Error(`no active button with value "${value}"`);
  }
  button.click();
}

export function bubbleTexts(scope: ParentNode): string[] {
  return Array.from(scope.querySelectorAll(".bubble > .body"))
    .map((el) => el.textContent ?? "");
}
